#include "instasent/service/manifest.h"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "instasent/common/digest.h"

namespace instasent::service {
namespace {

std::string DisplayPath(const PipelineConfig& config, const std::filesystem::path& path) {
  const auto rel = path.lexically_normal().lexically_relative(config.base_dir);
  if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
  return path.lexically_normal().generic_string();
}

// Directories digest as the hash of "<relative path>\t<sha256>\n" lines over
// their regular files in path order, skipping anything under exclude.
std::string DigestPath(const std::filesystem::path& path, const std::filesystem::path& exclude) {
  if (!std::filesystem::is_directory(path)) return Sha256File(path);
  const auto skip = std::filesystem::weakly_canonical(exclude);
  std::vector<std::filesystem::path> files;
  for (auto it = std::filesystem::recursive_directory_iterator(path); it != std::filesystem::recursive_directory_iterator(); ++it) {
    if (it->is_directory() && std::filesystem::weakly_canonical(it->path()) == skip) {
      it.disable_recursion_pending();
      continue;
    }
    if (it->is_regular_file()) files.push_back(it->path());
  }
  std::sort(files.begin(), files.end());
  std::string listing;
  for (const auto& f : files)
    listing += f.lexically_relative(path).generic_string() + "\t" + Sha256File(f) + "\n";
  return Sha256Hex(listing);
}

}  // namespace

void RunManifest::AddInput(const PipelineConfig& config, const std::filesystem::path& path) {
  inputs.push_back({DisplayPath(config, path), DigestPath(path, config.output_dir)});
}

void RunManifest::AddOutput(const PipelineConfig& config, const std::filesystem::path& path) {
  outputs.push_back({DisplayPath(config, path), DigestPath(path, config.output_dir)});
}

std::string RunManifest::ToJson() const {
  nlohmann::ordered_json o;
  o["subcommand"] = subcommand;
  o["config_sha256"] = config_sha256;
  o["seed"] = seed;
  auto list = [](const std::vector<FileDigest>& files) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& f : files) arr.push_back({{"path", f.path}, {"sha256", f.sha256}});
    return arr;
  };
  o["inputs"] = list(inputs);
  o["outputs"] = list(outputs);
  return o.dump(2) + "\n";
}

RunManifest StartManifest(const PipelineConfig& config, std::string subcommand) {
  RunManifest m;
  m.subcommand = std::move(subcommand);
  m.config_sha256 = config.Hash();
  m.seed = config.seed;
  return m;
}

std::filesystem::path WriteManifest(const PipelineConfig& config, const RunManifest& manifest) {
  const auto path = config.output_dir / "manifests" / (manifest.subcommand + ".json");
  std::filesystem::create_directories(path.parent_path());
  WriteFileBytes(path, manifest.ToJson());
  return path;
}

}  // namespace instasent::service
