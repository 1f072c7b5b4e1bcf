#include "instasent/preprocess/text.h"

namespace instasent::preprocess {
namespace {

bool IsSpace(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

}  // namespace

std::vector<std::string_view> SplitWords(std::string_view text) {
  std::vector<std::string_view> words;
  size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && IsSpace(text[i])) ++i;
    const size_t start = i;
    while (i < text.size() && !IsSpace(text[i])) ++i;
    if (i > start) words.push_back(text.substr(start, i - start));
  }
  return words;
}

std::size_t WordCount(std::string_view text) { return SplitWords(text).size(); }

std::string TrimWords(std::string_view text, std::size_t max_words) {
  const auto words = SplitWords(text);
  std::string out;
  for (size_t i = 0; i < words.size() && i < max_words; ++i) {
    if (i) out.push_back(' ');
    out.append(words[i]);
  }
  return out;
}

}  // namespace instasent::preprocess
