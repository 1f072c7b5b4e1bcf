#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "instasent/service/config.h"

namespace instasent::service {

struct FileDigest {
  std::string path;  // relative to the config directory when beneath it
  std::string sha256;
};

// Reproducibility record written by every subcommand. Carries no timestamps
// so re-runs on identical inputs produce identical bytes.
struct RunManifest {
  std::string subcommand;
  std::string config_sha256;
  std::uint64_t seed = 0;
  std::vector<FileDigest> inputs;
  std::vector<FileDigest> outputs;

  void AddInput(const PipelineConfig& config, const std::filesystem::path& path);
  void AddOutput(const PipelineConfig& config, const std::filesystem::path& path);
  std::string ToJson() const;
};

RunManifest StartManifest(const PipelineConfig& config, std::string subcommand);
// Writes <output_dir>/manifests/<subcommand>.json and returns its path.
std::filesystem::path WriteManifest(const PipelineConfig& config, const RunManifest& manifest);

}  // namespace instasent::service
