#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "instasent/corpus/types.h"

namespace instasent::corpus {

enum class PostFormat {
  kDelimited,      // tab-separated, header row of field names
  kRecordPerLine,  // one JSON object per line
};

std::optional<PostFormat> ParsePostFormat(std::string_view text);

struct ParseError {
  std::size_t line = 0;  // 1-based
  std::string message;
};

struct IngestResult {
  std::vector<PostRecord> posts;
  std::vector<ParseError> errors;
};

// Throws IoError when the file cannot be opened.
IngestResult Ingest(const std::filesystem::path& path, PostFormat format);
IngestResult ParsePosts(std::string_view text, PostFormat format);

std::string SerializePosts(const std::vector<PostRecord>& posts, PostFormat format);
void ExportPosts(const std::filesystem::path& path, const std::vector<PostRecord>& posts,
                 PostFormat format);

// Column order used by the delimited format and the field names of the
// record-per-line format.
const std::vector<std::string>& PostFieldNames();

}  // namespace instasent::corpus
