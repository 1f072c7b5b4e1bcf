#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "instasent/corpus/types.h"

namespace instasent::corpus {

struct CleanResult {
  std::vector<PostRecord> posts;
  CleanReport report;
  // Non-fatal observations, e.g. two post_ids sharing one shortcode.
  std::vector<std::string> warnings;
};

// Three passes in order: duplicate post_id removal (earliest created_at
// survives, ties keep the earlier row), completeness, corruption. Survivor
// order follows the input. media_path values are resolved against media_root.
CleanResult Clean(const std::vector<PostRecord>& posts, const std::filesystem::path& media_root);

}  // namespace instasent::corpus
