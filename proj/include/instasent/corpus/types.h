#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "instasent/common/time.h"

namespace instasent::corpus {

enum class MediaKind { kImage, kVideo };

std::string_view ToString(MediaKind kind);
std::optional<MediaKind> ParseMediaKind(std::string_view text);

// Five-way reaction taxonomy. Values are the on-disk label integers.
enum class SentimentClass : int {
  kMemesHumor = 1,
  kNewsNeutral = 2,
  kPositive = 3,
  kNegative = 4,
  kRandom = 5,
};

inline constexpr int kNumClasses = 5;
// Random is never used as a training target.
inline constexpr int kNumTrainingClasses = 4;

inline constexpr std::array<SentimentClass, kNumClasses> kAllClasses = {
    SentimentClass::kMemesHumor, SentimentClass::kNewsNeutral, SentimentClass::kPositive,
    SentimentClass::kNegative, SentimentClass::kRandom};

std::optional<SentimentClass> ClassFromInt(long long value);
inline int ToInt(SentimentClass c) { return static_cast<int>(c); }
inline bool IsTrainingClass(SentimentClass c) { return c != SentimentClass::kRandom; }
// 0-based index for classes 1..4, used by the classifiers.
inline int TrainingIndex(SentimentClass c) { return static_cast<int>(c) - 1; }
std::string_view DisplayName(SentimentClass c);

struct GeoPoint {
  double latitude = 0;
  double longitude = 0;
  bool operator==(const GeoPoint&) const = default;
};

// One scraped post. Required fields are optional<> here so that ingestion can
// carry incomplete rows through to clean(), which counts and drops them.
struct PostRecord {
  std::string post_id;
  std::optional<std::string> shortcode;
  std::optional<UtcSeconds> created_at;
  std::optional<MediaKind> media_kind;
  std::string source_url;
  std::string image_url_low;
  std::string image_url_high;
  std::optional<std::string> caption;
  std::string owner_id;
  std::optional<std::int64_t> likes_count;
  std::optional<std::int64_t> comments_count;
  std::optional<std::string> location_name;
  std::optional<GeoPoint> location;
  std::optional<std::string> media_path;  // relative to the media root

  // Fields present in the source row that failed to parse or violated a
  // range constraint. Not serialized.
  std::vector<std::string> invalid_fields;

  bool IsComplete() const;
  bool operator==(const PostRecord&) const = default;
};

struct Annotation {
  std::string post_id;
  SentimentClass image_class = SentimentClass::kRandom;
  SentimentClass caption_class = SentimentClass::kRandom;
  std::string annotator_id;
  UtcSeconds labeled_at = 0;
  bool operator==(const Annotation&) const = default;
};

struct CleanReport {
  std::int64_t input_count = 0;
  std::int64_t removed_duplicates = 0;
  std::int64_t removed_incomplete = 0;
  std::int64_t removed_corrupted = 0;
  std::int64_t output_count = 0;

  bool Balanced() const {
    return output_count == input_count - removed_duplicates - removed_incomplete - removed_corrupted;
  }
  bool operator==(const CleanReport&) const = default;
};

}  // namespace instasent::corpus
