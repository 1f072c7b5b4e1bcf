#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace instasent {

// Binary checkpoint container, little-endian:
//   "ISCKPT" u32 version
//   str model_kind
//   u32 n_meta, n_meta x (str key, str value)
//   u32 n_tensors, n_tensors x (str name, u32 rank, rank x u64 dim,
//                               prod(dims) x f64 row-major values)
// where str is u32 byte length followed by the bytes.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  std::vector<std::uint64_t> dims;
  std::vector<double> values;
};

struct Checkpoint {
  std::string model_kind;
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<NamedTensor> tensors;

  const std::string& Meta(const std::string& key) const;  // throws ConfigError
  // Throws ConfigError when the tensor is absent or its dims differ.
  const NamedTensor& Require(const std::string& name,
                             const std::vector<std::uint64_t>& dims) const;
};

std::string EncodeCheckpoint(const Checkpoint& ckpt);
// Throws ConfigError on bad magic, unknown version or truncation.
Checkpoint DecodeCheckpoint(const std::string& bytes);

void SaveCheckpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint LoadCheckpoint(const std::filesystem::path& path);

}  // namespace instasent
