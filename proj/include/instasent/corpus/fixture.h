#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "instasent/common/raster.h"
#include "instasent/common/rng.h"
#include "instasent/corpus/types.h"

namespace instasent::corpus {

// Injection rates, applied to n with integer division.
inline constexpr int kDuplicatePerMille = 50;
inline constexpr int kIncompletePerMille = 25;
inline constexpr int kCorruptedPerMille = 15;

inline constexpr int kFixtureImageSize = 32;

struct FixtureFile {
  std::string relative_path;
  std::string bytes;
  bool operator==(const FixtureFile&) const = default;
};

struct FixtureCorpus {
  std::vector<PostRecord> posts;
  std::vector<Annotation> annotations;
  std::vector<FixtureFile> media;  // media plus OCR/subtitle sidecars
  int injected_duplicates = 0;
  int injected_incomplete = 0;
  int injected_corrupted = 0;
};

// n records in total, including injected duplicates, incomplete and corrupted
// rows. Every class appears at least once when n >= 5; both media kinds
// appear when n >= 2. Throws ArgumentError for n < 1.
FixtureCorpus GenerateFixture(std::uint64_t seed, int n);

// Writes posts.jsonl, annotations.jsonl and media/ under dir.
void WriteFixture(const FixtureCorpus& fixture, const std::filesystem::path& dir);

struct LabeledText {
  SentimentClass label;
  std::string text;
};

struct LabeledImage {
  SentimentClass label;
  Rgb8Image image;
};

// Class-separable generators shared by the post fixture. Classes 1..4 only,
// balanced round-robin then shuffled.
std::vector<LabeledText> GenerateLabeledCaptions(std::uint64_t seed, int count);
std::vector<LabeledImage> GenerateLabeledImages(std::uint64_t seed, int count);

std::string SynthesizeCaption(Rng& rng, SentimentClass c);
Rgb8Image SynthesizeImage(Rng& rng, SentimentClass c);

}  // namespace instasent::corpus
