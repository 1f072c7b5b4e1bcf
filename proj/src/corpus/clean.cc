#include "instasent/corpus/clean.h"

#include <limits>
#include <unordered_map>

#include "instasent/common/error.h"
#include "instasent/common/raster.h"

namespace instasent::corpus {
namespace {

bool MediaIsCorrupt(const PostRecord& p, const std::filesystem::path& media_root) {
  if (!p.media_path) return false;
  const auto path = media_root / *p.media_path;
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) return false;
  try {
    DecodeMediaFile(path);
    return false;
  } catch (const CorruptMediaError&) {
    return true;
  }
}

}  // namespace

CleanResult Clean(const std::vector<PostRecord>& posts, const std::filesystem::path& media_root) {
  CleanResult result;
  result.report.input_count = static_cast<std::int64_t>(posts.size());

  // Duplicate pass: pick one survivor index per post_id.
  constexpr auto kNever = std::numeric_limits<UtcSeconds>::max();
  std::unordered_map<std::string, size_t> survivor;
  for (size_t i = 0; i < posts.size(); ++i) {
    auto [it, inserted] = survivor.try_emplace(posts[i].post_id, i);
    if (inserted) continue;
    const auto& best = posts[it->second];
    if (posts[i].created_at.value_or(kNever) < best.created_at.value_or(kNever)) it->second = i;
  }

  std::unordered_map<std::string, std::string> shortcode_owner;
  for (size_t i = 0; i < posts.size(); ++i) {
    const auto& p = posts[i];
    if (survivor.at(p.post_id) != i) {
      ++result.report.removed_duplicates;
      continue;
    }
    if (!p.IsComplete()) {
      ++result.report.removed_incomplete;
      continue;
    }
    if (!p.invalid_fields.empty() || MediaIsCorrupt(p, media_root)) {
      ++result.report.removed_corrupted;
      continue;
    }
    auto [it, inserted] = shortcode_owner.try_emplace(*p.shortcode, p.post_id);
    if (!inserted)
      result.warnings.push_back("shortcode " + *p.shortcode + " shared by post_ids " + it->second +
                                " and " + p.post_id);
    result.posts.push_back(p);
  }
  result.report.output_count = static_cast<std::int64_t>(result.posts.size());
  return result;
}

}  // namespace instasent::corpus
