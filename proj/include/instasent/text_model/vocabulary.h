#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace instasent::text_model {

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kOov = 1;

  Vocabulary();
  // Tokens seen at least min_count times; most frequent first, ties
  // alphabetical, capped at max_size entries including PAD/OOV.
  static Vocabulary Build(const std::vector<std::string>& texts, int min_count = 1,
                          std::size_t max_size = 20000);
  // Dense token list; entries 0 and 1 must be the PAD/OOV markers.
  static Vocabulary FromTokens(std::vector<std::string> tokens);

  int Index(std::string_view token) const;
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  void Add(std::string token);

  bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// Lowercase ASCII letters, map every ASCII character that is not a letter or
// digit to a space, split on whitespace. Non-ASCII bytes are kept in tokens.
std::vector<std::string> NormalizeTokens(std::string_view text);

std::vector<int> Tokenize(std::string_view text, const Vocabulary& vocab, std::size_t max_len = 300);

}  // namespace instasent::text_model
