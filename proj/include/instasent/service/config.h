#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "instasent/image_model/cnn.h"
#include "instasent/text_model/attention_lstm.h"

namespace instasent::service {

// Environment variable that replaces output_dir when set and non-empty.
inline constexpr const char* kOutputDirEnv = "INSTASENT_OUTPUT_DIR";

// Pipeline settings read from a "key = value" file ('#' starts a comment).
// Relative paths resolve against the directory holding the file.
struct PipelineConfig {
  std::filesystem::path base_dir;  // directory of the config file

  std::uint64_t seed = 0;
  std::filesystem::path posts;  // raw scraped posts
  std::string posts_format = "jsonl";
  std::filesystem::path media_root;
  std::filesystem::path annotations;
  std::filesystem::path output_dir;
  std::optional<std::filesystem::path> pretrain_text;    // labeled text: "<label>\t<text>"
  std::optional<std::filesystem::path> pretrain_images;  // manifest: "<path>\t<label>"
  std::optional<std::filesystem::path> atlas;

  std::string ocr = "stub";
  std::string subtitle = "stub";
  std::string translation = "stub";

  double holdout = 0.2;  // fraction of annotated posts kept for evaluation

  text_model::TrainConfig text;
  int text_pretrain_epochs = 20;
  int text_dim = 16;
  image_model::FineTuneConfig image;
  int image_pretrain_epochs = 10;
  int image_frozen_prefix = 0;

  int report_k = 15;
  double report_resolution = 1.0;
  std::string report_metric = "posts";
  std::int64_t report_bar_cap = 60;
  std::int64_t report_likes_cap = 5000;

  // Canonical "key = value" lines for every setting, as written or
  // defaulted (paths unresolved), sorted by key.
  std::string Canonical() const;
  // SHA-256 of Canonical().
  std::string Hash() const;

  std::map<std::string, std::string> raw;  // effective key -> value text
};

// Throws ConfigError on unknown keys, malformed values, a missing seed, or
// unresolvable input paths. Applies kOutputDirEnv.
PipelineConfig LoadConfig(const std::filesystem::path& path);
PipelineConfig ParseConfig(std::string_view text, const std::filesystem::path& base_dir);

// Every key ParseConfig understands, with its default ("" when required or
// unset).
const std::map<std::string, std::string>& ConfigDefaults();

}  // namespace instasent::service
