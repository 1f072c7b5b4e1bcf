#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace instasent::preprocess {

inline constexpr std::size_t kMaxCaptionWords = 300;

std::vector<std::string_view> SplitWords(std::string_view text);
std::size_t WordCount(std::string_view text);

// First min(max_words, n) whitespace-delimited tokens joined by single spaces.
std::string TrimWords(std::string_view text, std::size_t max_words);
inline std::string Trim300(std::string_view text) { return TrimWords(text, kMaxCaptionWords); }

}  // namespace instasent::preprocess
