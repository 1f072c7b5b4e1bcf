#include "instasent/common/checkpoint.h"

#include <bit>
#include <cstring>

#include "instasent/common/digest.h"
#include "instasent/common/error.h"

namespace instasent {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes little-endian");

constexpr char kMagic[] = "ISCKPT";

template <typename T>
void Put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

void PutStr(std::string& out, const std::string& s) {
  Put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T Get() {
    Need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string GetStr() {
    const auto n = Get<std::uint32_t>();
    Need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void Need(std::uint64_t n) const {
    if (n > bytes_.size() - pos_) throw ConfigError("checkpoint truncated");
  }
  bool AtEnd() const { return pos_ == bytes_.size(); }
  void Skip(size_t n) {
    Need(n);
    pos_ += n;
  }

 private:
  const std::string& bytes_;
  size_t pos_ = 0;
};

std::string DimsString(const std::vector<std::uint64_t>& dims) {
  std::string s = "[";
  for (size_t i = 0; i < dims.size(); ++i) s += (i ? "x" : "") + std::to_string(dims[i]);
  return s + "]";
}

}  // namespace

const std::string& Checkpoint::Meta(const std::string& key) const {
  for (const auto& [k, v] : metadata)
    if (k == key) return v;
  throw ConfigError("checkpoint lacks metadata key " + key);
}

const NamedTensor& Checkpoint::Require(const std::string& name,
                                       const std::vector<std::uint64_t>& dims) const {
  for (const auto& t : tensors) {
    if (t.name != name) continue;
    if (t.dims != dims)
      throw ConfigError("tensor " + name + " has shape " + DimsString(t.dims) + ", expected " +
                        DimsString(dims));
    return t;
  }
  throw ConfigError("checkpoint lacks tensor " + name);
}

std::string EncodeCheckpoint(const Checkpoint& ckpt) {
  std::string out(kMagic, 6);
  Put<std::uint32_t>(out, kCheckpointVersion);
  PutStr(out, ckpt.model_kind);
  Put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.metadata.size()));
  for (const auto& [k, v] : ckpt.metadata) {
    PutStr(out, k);
    PutStr(out, v);
  }
  Put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    std::uint64_t count = 1;
    for (auto d : t.dims) count *= d;
    if (count != t.values.size()) throw ConfigError("tensor " + t.name + " value count mismatch");
    PutStr(out, t.name);
    Put<std::uint32_t>(out, static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) Put<std::uint64_t>(out, d);
    for (double v : t.values) Put<double>(out, v);
  }
  return out;
}

Checkpoint DecodeCheckpoint(const std::string& bytes) {
  if (bytes.size() < 6 || bytes.compare(0, 6, kMagic) != 0)
    throw ConfigError("not a checkpoint file");
  Reader r(bytes);
  r.Skip(6);
  const auto version = r.Get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw ConfigError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  ckpt.model_kind = r.GetStr();
  const auto n_meta = r.Get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    auto k = r.GetStr();
    auto v = r.GetStr();
    ckpt.metadata.emplace_back(std::move(k), std::move(v));
  }
  const auto n_tensors = r.Get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    NamedTensor t;
    t.name = r.GetStr();
    const auto rank = r.Get<std::uint32_t>();
    std::uint64_t count = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      t.dims.push_back(r.Get<std::uint64_t>());
      count *= t.dims.back();
    }
    r.Need(count * sizeof(double));
    t.values.resize(count);
    for (auto& v : t.values) v = r.Get<double>();
    ckpt.tensors.push_back(std::move(t));
  }
  if (!r.AtEnd()) throw ConfigError("trailing bytes after checkpoint");
  return ckpt;
}

void SaveCheckpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  WriteFileBytes(path, EncodeCheckpoint(ckpt));
}

Checkpoint LoadCheckpoint(const std::filesystem::path& path) {
  return DecodeCheckpoint(ReadFileBytes(path));
}

}  // namespace instasent
