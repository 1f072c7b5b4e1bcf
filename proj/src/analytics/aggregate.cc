#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include "instasent/analytics/analytics.h"
#include "instasent/common/error.h"
#include "instasent/corpus/annotation_store.h"

namespace instasent::analytics {

using corpus::Annotation;
using corpus::PostRecord;
using corpus::SentimentClass;

GeoMetric ParseGeoMetric(const std::string& text) {
  if (text == "posts") return GeoMetric::kPosts;
  if (text == "likes") return GeoMetric::kLikes;
  if (text == "comments") return GeoMetric::kComments;
  throw ArgumentError("unknown geo metric '" + text + "' (expected posts, likes or comments)");
}

std::string ToString(GeoMetric metric) {
  switch (metric) {
    case GeoMetric::kPosts: return "posts";
    case GeoMetric::kLikes: return "likes";
    case GeoMetric::kComments: return "comments";
  }
  return "";
}

GeoAggregate AggregateGeo(const std::vector<PostRecord>& posts, GeoMetric metric, double resolution) {
  if (!(resolution > 0) || !std::isfinite(resolution)) throw ArgumentError("resolution must be > 0");
  std::map<std::pair<std::int64_t, std::int64_t>, GeoCell> cells;
  for (const auto& p : posts) {
    if (!p.location) continue;
    const auto lat_bin = static_cast<std::int64_t>(std::floor(p.location->latitude / resolution));
    const auto lon_bin = static_cast<std::int64_t>(std::floor(p.location->longitude / resolution));
    auto& c = cells[{lat_bin, lon_bin}];
    c.lat_bin = lat_bin;
    c.lon_bin = lon_bin;
    c.post_count += 1;
    c.likes_sum += p.likes_count.value_or(0);
    c.comments_sum += p.comments_count.value_or(0);
  }
  GeoAggregate out;
  out.resolution = resolution;
  out.metric = metric;
  for (auto& [key, c] : cells) {
    c.value = metric == GeoMetric::kPosts ? c.post_count
              : metric == GeoMetric::kLikes ? c.likes_sum
                                            : c.comments_sum;
    out.cells.push_back(c);
  }
  return out;
}

std::string ResolveCountry(const PostRecord& post, const Atlas& atlas) {
  if (!post.location) return std::string(kUnresolved);
  return atlas.Resolve(post.location->latitude, post.location->longitude);
}

std::vector<CountryRow> CountryCounts(const std::vector<PostRecord>& posts,
                                      const std::vector<Annotation>& annotations, const Atlas& atlas) {
  std::unordered_map<std::string, SentimentClass> caption_of;
  for (const auto& a : corpus::OnePerPost(annotations)) caption_of[a.post_id] = a.caption_class;
  std::map<std::string, CountryRow> rows;
  for (const auto& p : posts) {
    if (!p.location) continue;
    const auto code = ResolveCountry(p, atlas);
    auto& row = rows[code];
    row.country_code = code;
    row.post_count += 1;
    if (auto it = caption_of.find(p.post_id); it != caption_of.end())
      row.class_counts[corpus::ToInt(it->second) - 1] += 1;
  }
  std::vector<CountryRow> out;
  for (auto& [code, row] : rows) out.push_back(row);
  std::stable_sort(out.begin(), out.end(),
                   [](const CountryRow& a, const CountryRow& b) { return a.post_count > b.post_count; });
  return out;
}

std::vector<CountryRow> CountryReport(const std::vector<PostRecord>& posts,
                                      const std::vector<Annotation>& annotations, int k, const Atlas& atlas) {
  if (k < 1) throw ArgumentError("k must be >= 1");
  std::vector<CountryRow> out;
  for (auto& row : CountryCounts(posts, annotations, atlas)) {
    if (row.country_code == kUnresolved) continue;
    if (static_cast<int>(out.size()) == k) break;
    out.push_back(std::move(row));
  }
  return out;
}

std::int64_t OverlapMatrix::Total() const {
  std::int64_t t = 0;
  for (const auto& row : cells)
    for (auto v : row) t += v;
  return t;
}

std::int64_t OverlapMatrix::Trace() const {
  std::int64_t t = 0;
  for (int i = 0; i < corpus::kNumClasses; ++i) t += cells[i][i];
  return t;
}

OverlapMatrix BuildOverlapMatrix(const std::vector<Annotation>& annotations) {
  OverlapMatrix m;
  for (const auto& a : corpus::OnePerPost(annotations))
    m.cells[corpus::ToInt(a.image_class) - 1][corpus::ToInt(a.caption_class) - 1] += 1;
  return m;
}

EngagementExport ExportEngagement(const std::vector<PostRecord>& posts,
                                  const std::vector<Annotation>& annotations) {
  std::unordered_map<std::string, const PostRecord*> by_id;
  for (const auto& p : posts) by_id.emplace(p.post_id, &p);
  EngagementExport out;
  for (const auto& a : corpus::OnePerPost(annotations)) {
    auto it = by_id.find(a.post_id);
    if (it == by_id.end()) continue;
    EngagementPoint pt;
    pt.post_id = a.post_id;
    pt.likes_count = it->second->likes_count.value_or(0);
    pt.comments_count = it->second->comments_count.value_or(0);
    pt.image_class = a.image_class;
    pt.caption_class = a.caption_class;
    pt.ratio = static_cast<double>(pt.comments_count + 1) / static_cast<double>(pt.likes_count + 1);
    out.points.push_back(std::move(pt));
  }
  for (auto source : {LabelSource::kCaption, LabelSource::kImage}) {
    for (auto label : corpus::kAllClasses) {
      ClassRatio r{source, label, 0, 0.0};
      for (const auto& pt : out.points) {
        if ((source == LabelSource::kCaption ? pt.caption_class : pt.image_class) != label) continue;
        r.posts += 1;
        r.mean_ratio += pt.ratio;
      }
      if (r.posts > 0) r.mean_ratio /= static_cast<double>(r.posts);
      out.means.push_back(r);
    }
  }
  return out;
}

ReportSet BuildReports(const std::vector<PostRecord>& posts, const std::vector<Annotation>& annotations,
                       const Atlas& atlas, const ReportOptions& options, GeoMetric metric,
                       double resolution) {
  ReportSet r;
  r.geo = AggregateGeo(posts, metric, resolution);
  r.countries = CountryReport(posts, annotations, options.country_k, atlas);
  // Only annotations for posts in the report scope feed the overlap matrix.
  std::unordered_map<std::string, bool> known;
  for (const auto& p : posts) known[p.post_id] = true;
  std::vector<Annotation> scoped;
  for (const auto& a : annotations)
    if (known.count(a.post_id)) scoped.push_back(a);
  r.overlap = BuildOverlapMatrix(scoped);
  r.engagement = ExportEngagement(posts, annotations);
  return r;
}

}  // namespace instasent::analytics
