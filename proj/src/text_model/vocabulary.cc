#include "instasent/text_model/vocabulary.h"

#include <algorithm>
#include <map>

#include "instasent/common/error.h"

namespace instasent::text_model {

Vocabulary::Vocabulary() {
  Add("<pad>");
  Add("<oov>");
}

void Vocabulary::Add(std::string token) {
  if (index_.contains(token)) return;
  index_.emplace(token, static_cast<int>(tokens_.size()));
  tokens_.push_back(std::move(token));
}

Vocabulary Vocabulary::Build(const std::vector<std::string>& texts, int min_count,
                             std::size_t max_size) {
  std::map<std::string, int> freq;
  for (const auto& t : texts)
    for (auto& tok : NormalizeTokens(t)) ++freq[tok];
  std::vector<std::pair<std::string, int>> ranked(freq.begin(), freq.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v;
  for (auto& [tok, n] : ranked) {
    if (static_cast<std::size_t>(v.size()) >= max_size) break;
    if (n >= min_count) v.Add(tok);
  }
  return v;
}

Vocabulary Vocabulary::FromTokens(std::vector<std::string> tokens) {
  if (tokens.size() < 2 || tokens[0] != "<pad>" || tokens[1] != "<oov>")
    throw ConfigError("vocabulary must start with <pad>, <oov>");
  Vocabulary v;
  for (size_t i = 2; i < tokens.size(); ++i) {
    const int before = v.size();
    v.Add(std::move(tokens[i]));
    if (v.size() == before) throw ConfigError("duplicate vocabulary entry");
  }
  return v;
}

int Vocabulary::Index(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  return it == index_.end() ? kOov : it->second;
}

std::vector<std::string> NormalizeTokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto u = static_cast<unsigned char>(ch);
    if (u >= 0x80 || (u >= '0' && u <= '9') || (u >= 'a' && u <= 'z')) {
      cur.push_back(ch);
    } else if (u >= 'A' && u <= 'Z') {
      cur.push_back(static_cast<char>(u - 'A' + 'a'));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<int> Tokenize(std::string_view text, const Vocabulary& vocab, std::size_t max_len) {
  std::vector<int> ids;
  for (const auto& tok : NormalizeTokens(text)) {
    if (ids.size() >= max_len) break;
    ids.push_back(vocab.Index(tok));
  }
  return ids;
}

}  // namespace instasent::text_model
