#include "instasent/corpus/post_io.h"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "instasent/common/digest.h"
#include "instasent/common/error.h"

namespace instasent::corpus {
namespace {

using ordered_json = nlohmann::ordered_json;

std::optional<std::int64_t> ParseInt(std::string_view s) {
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<double> ParseDouble(std::string_view s) {
  if (s.empty()) return std::nullopt;
  std::string tmp(s);
  char* end = nullptr;
  const double v = std::strtod(tmp.c_str(), &end);
  if (end != tmp.c_str() + tmp.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

// Field values arrive as text (delimited) or JSON scalars (record-per-line);
// both paths funnel through this builder so validation rules are shared.
class RecordBuilder {
 public:
  void Set(std::string_view name, std::string_view text) {
    if (name == "post_id") {
      rec_.post_id = std::string(text);
    } else if (name == "shortcode") {
      rec_.shortcode = std::string(text);
    } else if (name == "created_at") {
      if (auto t = ParseTimestamp(text)) rec_.created_at = *t;
      else Invalid("created_at");
    } else if (name == "media_kind") {
      if (auto k = ParseMediaKind(text)) rec_.media_kind = *k;
      else Invalid("media_kind");
    } else if (name == "source_url") {
      rec_.source_url = std::string(text);
    } else if (name == "image_url_low") {
      rec_.image_url_low = std::string(text);
    } else if (name == "image_url_high") {
      rec_.image_url_high = std::string(text);
    } else if (name == "caption") {
      rec_.caption = std::string(text);
    } else if (name == "owner_id") {
      rec_.owner_id = std::string(text);
    } else if (name == "likes_count") {
      SetCount(text, rec_.likes_count, "likes_count");
    } else if (name == "comments_count") {
      SetCount(text, rec_.comments_count, "comments_count");
    } else if (name == "location_name") {
      rec_.location_name = std::string(text);
    } else if (name == "latitude") {
      lat_ = ParseDouble(text);
      if (!lat_) Invalid("latitude");
      lat_seen_ = true;
    } else if (name == "longitude") {
      lon_ = ParseDouble(text);
      if (!lon_) Invalid("longitude");
      lon_seen_ = true;
    } else if (name == "media_path") {
      rec_.media_path = std::string(text);
    }
    // Unknown columns are ignored so that richer exports still load.
  }

  void SetNumber(std::string_view name, const ordered_json& v) {
    if (name == "latitude" || name == "longitude" || name == "likes_count" ||
        name == "comments_count" || name == "created_at") {
      if (v.is_number_integer()) return Set(name, std::to_string(v.get<std::int64_t>()));
      if (v.is_number_float()) {
        const double d = v.get<double>();
        if (name == "latitude") lat_ = d, lat_seen_ = true;
        else if (name == "longitude") lon_ = d, lon_seen_ = true;
        else Invalid(std::string(name));
        return;
      }
    }
    Invalid(std::string(name));
  }

  PostRecord Finish() {
    if (lat_seen_ != lon_seen_) {
      Invalid("location");
    } else if (lat_ && lon_) {
      if (*lat_ < -90 || *lat_ > 90) Invalid("latitude");
      else if (*lon_ < -180 || *lon_ > 180) Invalid("longitude");
      else rec_.location = GeoPoint{*lat_, *lon_};
    }
    return std::move(rec_);
  }

 private:
  void Invalid(std::string name) { rec_.invalid_fields.push_back(std::move(name)); }

  void SetCount(std::string_view text, std::optional<std::int64_t>& out, const char* name) {
    auto v = ParseInt(text);
    if (v && *v >= 0) out = *v;
    else Invalid(name);
  }

  PostRecord rec_;
  std::optional<double> lat_, lon_;
  bool lat_seen_ = false, lon_seen_ = false;
};

std::string Unescape(std::string_view cell) {
  std::string out;
  out.reserve(cell.size());
  for (size_t i = 0; i < cell.size(); ++i) {
    if (cell[i] == '\\' && i + 1 < cell.size()) {
      switch (cell[++i]) {
        case 't': out.push_back('\t'); break;
        case 'n': out.push_back('\n'); break;
        case 'r': out.push_back('\r'); break;
        case '\\': out.push_back('\\'); break;
        default: out.push_back('\\'); out.push_back(cell[i]);
      }
    } else {
      out.push_back(cell[i]);
    }
  }
  return out;
}

std::string Escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\\': out += "\\\\"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::vector<std::string_view> SplitTabs(std::string_view line) {
  std::vector<std::string_view> cells;
  size_t start = 0;
  for (;;) {
    const size_t tab = line.find('\t', start);
    cells.push_back(line.substr(start, tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return cells;
}

std::vector<std::string_view> SplitLines(std::string_view text) {
  std::vector<std::string_view> lines;
  size_t start = 0;
  while (start < text.size()) {
    size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = nl + 1;
  }
  return lines;
}

bool IsBlank(std::string_view s) { return s.find_first_not_of(" \t") == std::string_view::npos; }

void FinishRow(RecordBuilder& b, size_t line_no, IngestResult& out) {
  PostRecord rec = b.Finish();
  if (rec.post_id.empty()) {
    out.errors.push_back({line_no, "missing post_id"});
    return;
  }
  out.posts.push_back(std::move(rec));
}

IngestResult ParseDelimited(std::string_view text) {
  IngestResult out;
  const auto lines = SplitLines(text);
  size_t i = 0;
  while (i < lines.size() && IsBlank(lines[i])) ++i;
  if (i == lines.size()) return out;
  std::vector<std::string> header;
  for (auto cell : SplitTabs(lines[i])) header.emplace_back(cell);
  bool has_id = false;
  for (const auto& h : header) has_id |= h == "post_id";
  if (!has_id) {
    out.errors.push_back({i + 1, "header lacks post_id column"});
    return out;
  }
  for (++i; i < lines.size(); ++i) {
    if (IsBlank(lines[i])) continue;
    const auto cells = SplitTabs(lines[i]);
    if (cells.size() != header.size()) {
      out.errors.push_back({i + 1, "expected " + std::to_string(header.size()) + " columns, got " +
                                       std::to_string(cells.size())});
      continue;
    }
    RecordBuilder b;
    for (size_t c = 0; c < cells.size(); ++c)
      if (!cells[c].empty()) b.Set(header[c], Unescape(cells[c]));
    FinishRow(b, i + 1, out);
  }
  return out;
}

IngestResult ParseRecordPerLine(std::string_view text) {
  IngestResult out;
  const auto lines = SplitLines(text);
  for (size_t i = 0; i < lines.size(); ++i) {
    if (IsBlank(lines[i])) continue;
    ordered_json obj = ordered_json::parse(lines[i], nullptr, /*allow_exceptions=*/false);
    if (obj.is_discarded() || !obj.is_object()) {
      out.errors.push_back({i + 1, "not a JSON object"});
      continue;
    }
    RecordBuilder b;
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      const auto& v = it.value();
      if (v.is_null()) continue;
      if (v.is_string()) {
        b.Set(it.key(), v.get_ref<const std::string&>());
      } else if (v.is_number()) {
        if (it.key() == "post_id" || it.key() == "owner_id")
          b.Set(it.key(), v.dump());
        else
          b.SetNumber(it.key(), v);
      } else {
        b.SetNumber(it.key(), v);
      }
    }
    FinishRow(b, i + 1, out);
  }
  return out;
}

std::string FormatDouble(double v) { return ordered_json(v).dump(); }

}  // namespace

std::optional<PostFormat> ParsePostFormat(std::string_view text) {
  if (text == "delimited" || text == "tsv") return PostFormat::kDelimited;
  if (text == "record-per-line" || text == "jsonl") return PostFormat::kRecordPerLine;
  return std::nullopt;
}

const std::vector<std::string>& PostFieldNames() {
  static const std::vector<std::string> kNames = {
      "post_id",    "shortcode",      "created_at",     "media_kind",    "source_url",
      "image_url_low", "image_url_high", "caption",     "owner_id",      "likes_count",
      "comments_count", "location_name", "latitude",    "longitude",     "media_path"};
  return kNames;
}

IngestResult ParsePosts(std::string_view text, PostFormat format) {
  return format == PostFormat::kDelimited ? ParseDelimited(text) : ParseRecordPerLine(text);
}

IngestResult Ingest(const std::filesystem::path& path, PostFormat format) {
  if (!std::filesystem::is_regular_file(path)) throw IoError("no such file: " + path.string());
  return ParsePosts(ReadFileBytes(path), format);
}

std::string SerializePosts(const std::vector<PostRecord>& posts, PostFormat format) {
  std::ostringstream out;
  if (format == PostFormat::kRecordPerLine) {
    for (const auto& p : posts) {
      ordered_json o;
      o["post_id"] = p.post_id;
      if (p.shortcode) o["shortcode"] = *p.shortcode;
      if (p.created_at) o["created_at"] = *p.created_at;
      if (p.media_kind) o["media_kind"] = std::string(ToString(*p.media_kind));
      if (!p.source_url.empty()) o["source_url"] = p.source_url;
      if (!p.image_url_low.empty()) o["image_url_low"] = p.image_url_low;
      if (!p.image_url_high.empty()) o["image_url_high"] = p.image_url_high;
      if (p.caption) o["caption"] = *p.caption;
      if (!p.owner_id.empty()) o["owner_id"] = p.owner_id;
      if (p.likes_count) o["likes_count"] = *p.likes_count;
      if (p.comments_count) o["comments_count"] = *p.comments_count;
      if (p.location_name) o["location_name"] = *p.location_name;
      if (p.location) {
        o["latitude"] = p.location->latitude;
        o["longitude"] = p.location->longitude;
      }
      if (p.media_path) o["media_path"] = *p.media_path;
      out << o.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
    }
    return out.str();
  }
  const auto& names = PostFieldNames();
  for (size_t i = 0; i < names.size(); ++i) out << (i ? "\t" : "") << names[i];
  out << '\n';
  for (const auto& p : posts) {
    const std::string cells[] = {
        p.post_id,
        p.shortcode.value_or(""),
        p.created_at ? std::to_string(*p.created_at) : "",
        p.media_kind ? std::string(ToString(*p.media_kind)) : "",
        p.source_url,
        p.image_url_low,
        p.image_url_high,
        p.caption.value_or(""),
        p.owner_id,
        p.likes_count ? std::to_string(*p.likes_count) : "",
        p.comments_count ? std::to_string(*p.comments_count) : "",
        p.location_name.value_or(""),
        p.location ? FormatDouble(p.location->latitude) : "",
        p.location ? FormatDouble(p.location->longitude) : "",
        p.media_path.value_or(""),
    };
    for (size_t i = 0; i < std::size(cells); ++i) out << (i ? "\t" : "") << Escape(cells[i]);
    out << '\n';
  }
  return out.str();
}

void ExportPosts(const std::filesystem::path& path, const std::vector<PostRecord>& posts,
                 PostFormat format) {
  WriteFileBytes(path, SerializePosts(posts, format));
}

}  // namespace instasent::corpus
