#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "instasent/analytics/atlas.h"
#include "instasent/corpus/types.h"

namespace instasent::analytics {

enum class GeoMetric { kPosts, kLikes, kComments };
GeoMetric ParseGeoMetric(const std::string& text);  // throws ArgumentError
std::string ToString(GeoMetric metric);

// Bin indices are floor(lat / resolution), floor(lon / resolution).
struct GeoCell {
  std::int64_t lat_bin = 0;
  std::int64_t lon_bin = 0;
  std::int64_t post_count = 0;
  std::int64_t likes_sum = 0;
  std::int64_t comments_sum = 0;
  std::int64_t value = 0;  // the requested metric
  bool operator==(const GeoCell&) const = default;
};

struct GeoAggregate {
  double resolution = 1.0;
  GeoMetric metric = GeoMetric::kPosts;
  std::vector<GeoCell> cells;  // ascending (lat_bin, lon_bin)
};

// Posts without a location are skipped. Missing counts contribute 0. Throws
// ArgumentError unless resolution > 0.
GeoAggregate AggregateGeo(const std::vector<corpus::PostRecord>& posts, GeoMetric metric,
                          double resolution = 1.0);

// kUnresolved when the post has no coordinates.
std::string ResolveCountry(const corpus::PostRecord& post, const Atlas& atlas);

struct CountryRow {
  std::string country_code;
  std::int64_t post_count = 0;
  // Caption-label tally over annotated posts, indexed by class - 1.
  std::array<std::int64_t, corpus::kNumClasses> class_counts{};
  bool operator==(const CountryRow&) const = default;
};

// Every resolved country plus an UNRESOLVED row when any geolocated post
// falls outside the atlas, ordered by post_count descending then code.
// Annotations are reduced with OnePerPost first.
std::vector<CountryRow> CountryCounts(const std::vector<corpus::PostRecord>& posts,
                                      const std::vector<corpus::Annotation>& annotations,
                                      const Atlas& atlas);
// First k rows of CountryCounts, excluding UNRESOLVED. Throws ArgumentError
// for k < 1.
std::vector<CountryRow> CountryReport(const std::vector<corpus::PostRecord>& posts,
                                      const std::vector<corpus::Annotation>& annotations, int k,
                                      const Atlas& atlas);

// cells[image_class - 1][caption_class - 1], one annotation per post.
struct OverlapMatrix {
  std::array<std::array<std::int64_t, corpus::kNumClasses>, corpus::kNumClasses> cells{};
  std::int64_t Total() const;
  std::int64_t Trace() const;
  bool operator==(const OverlapMatrix&) const = default;
};
OverlapMatrix BuildOverlapMatrix(const std::vector<corpus::Annotation>& annotations);

struct EngagementPoint {
  std::string post_id;
  std::int64_t likes_count = 0;
  std::int64_t comments_count = 0;
  corpus::SentimentClass image_class = corpus::SentimentClass::kRandom;
  corpus::SentimentClass caption_class = corpus::SentimentClass::kRandom;
  double ratio = 0;  // (comments + 1) / (likes + 1)
};

enum class LabelSource { kImage, kCaption };

struct ClassRatio {
  LabelSource source = LabelSource::kCaption;
  corpus::SentimentClass label = corpus::SentimentClass::kRandom;
  std::int64_t posts = 0;
  double mean_ratio = 0;  // 0 when posts == 0
};

struct EngagementExport {
  std::vector<EngagementPoint> points;  // ascending post_id
  // Caption rows for classes 1..5, then image rows for classes 1..5.
  std::vector<ClassRatio> means;
};

// One point per annotated post present in posts. The export is uncapped;
// likes caps only apply when plotting.
EngagementExport ExportEngagement(const std::vector<corpus::PostRecord>& posts,
                                  const std::vector<corpus::Annotation>& annotations);

struct ReportOptions {
  int country_k = 15;
  std::int64_t bar_cap = 60;          // y-axis limit of the country bar chart
  std::int64_t likes_cap = 5000;      // x-axis limit of the engagement scatter; 0 = none
};

struct ReportSet {
  GeoAggregate geo;
  std::vector<CountryRow> countries;
  OverlapMatrix overlap;
  EngagementExport engagement;
};

ReportSet BuildReports(const std::vector<corpus::PostRecord>& posts,
                       const std::vector<corpus::Annotation>& annotations, const Atlas& atlas,
                       const ReportOptions& options, GeoMetric metric = GeoMetric::kPosts,
                       double resolution = 1.0);

// Writes geo_aggregate.csv, country_report.csv, country_bar.csv (the bar
// chart's data, identical to country_report.csv), overlap_matrix.csv,
// engagement_points.csv and engagement_means.csv, plus geo_heatmap.png,
// country_bar.png, overlap_heatmap.png and engagement_scatter.png when the
// underlying data is non-empty. Returns the written paths in order. Throws
// IoError when the directory cannot be written.
std::vector<std::filesystem::path> RenderReports(const ReportSet& reports,
                                                 const std::filesystem::path& out_dir,
                                                 const ReportOptions& options);

// CSV bodies behind the files above, exposed for tests and the CLI.
std::string GeoCsv(const GeoAggregate& geo);
std::string CountryCsv(const std::vector<CountryRow>& rows);
std::string OverlapCsv(const OverlapMatrix& m);
std::string EngagementPointsCsv(const EngagementExport& e);
std::string EngagementMeansCsv(const EngagementExport& e);

}  // namespace instasent::analytics
