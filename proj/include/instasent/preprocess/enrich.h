#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "instasent/common/raster.h"
#include "instasent/corpus/types.h"
#include "instasent/preprocess/providers.h"

namespace instasent::preprocess {

struct EnrichedCaption {
  std::string post_id;
  std::string base_caption;
  std::optional<std::string> ocr_text;
  std::optional<std::string> subtitle_text;
  bool translated = false;
  std::string final_text;
  std::size_t token_count = 0;
  // Provider failures, recorded and otherwise treated as empty output.
  std::vector<std::string> provider_errors;

  bool operator==(const EnrichedCaption&) const = default;
};

// Temporally first frame of a .vseq container, or the image itself for a
// still. Throws CorruptMediaError for undecodable or zero-frame input.
Rgb8Image FirstFrame(const std::filesystem::path& media_path);

// final_text = Trim300(translate(caption + " " + ocr + " " + subtitles)), absent
// parts skipped. OCR runs on every media kind, subtitles on video only.
EnrichedCaption Enrich(const corpus::PostRecord& post, const ProviderSet& providers,
                       const std::filesystem::path& media_root);

std::string SerializeEnriched(const std::vector<EnrichedCaption>& captions);
// Throws ArgumentError on malformed lines.
std::vector<EnrichedCaption> ParseEnriched(std::string_view text);

}  // namespace instasent::preprocess
