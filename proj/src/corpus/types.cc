#include "instasent/corpus/types.h"

#include <algorithm>

namespace instasent::corpus {

std::string_view ToString(MediaKind kind) { return kind == MediaKind::kImage ? "image" : "video"; }

std::optional<MediaKind> ParseMediaKind(std::string_view text) {
  if (text == "image") return MediaKind::kImage;
  if (text == "video") return MediaKind::kVideo;
  return std::nullopt;
}

std::optional<SentimentClass> ClassFromInt(long long value) {
  if (value < 1 || value > kNumClasses) return std::nullopt;
  return static_cast<SentimentClass>(value);
}

std::string_view DisplayName(SentimentClass c) {
  switch (c) {
    case SentimentClass::kMemesHumor: return "Memes/Humor";
    case SentimentClass::kNewsNeutral: return "News/Neutral";
    case SentimentClass::kPositive: return "Positive";
    case SentimentClass::kNegative: return "Negative";
    case SentimentClass::kRandom: return "Random";
  }
  return "?";
}

bool PostRecord::IsComplete() const {
  // A field that was present but unparseable is not "missing"; the corruption
  // pass accounts for it.
  auto has = [this](bool present, std::string_view name) {
    return present || std::find(invalid_fields.begin(), invalid_fields.end(), name) !=
                          invalid_fields.end();
  };
  return !post_id.empty() && has(shortcode.has_value() && !shortcode->empty(), "shortcode") &&
         has(created_at.has_value(), "created_at") && has(media_kind.has_value(), "media_kind") &&
         has(caption.has_value(), "caption") && has(likes_count.has_value(), "likes_count") &&
         has(comments_count.has_value(), "comments_count");
}

}  // namespace instasent::corpus
