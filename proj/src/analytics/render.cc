#include <algorithm>
#include <cmath>
#include <cstdio>

#include "instasent/analytics/analytics.h"
#include "instasent/common/digest.h"
#include "instasent/common/error.h"
#include "instasent/common/raster.h"

namespace instasent::analytics {
namespace {

using corpus::SentimentClass;

struct Color {
  std::uint8_t r, g, b;
};

constexpr Color kBackground{250, 250, 250};
constexpr Color kAxis{60, 60, 60};
constexpr std::array<Color, corpus::kNumClasses> kClassColors = {
    Color{240, 180, 0}, Color{70, 130, 180}, Color{60, 170, 75}, Color{210, 40, 40}, Color{150, 150, 150}};

std::string Fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

Rgb8Image Canvas(int w, int h, Color c) {
  Rgb8Image img;
  img.width = w;
  img.height = h;
  img.pixels.resize(static_cast<size_t>(w) * h * 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img.set(x, y, c.r, c.g, c.b);
  return img;
}

void FillRect(Rgb8Image& img, int x0, int y0, int x1, int y1, Color c) {
  x0 = std::clamp(x0, 0, img.width);
  x1 = std::clamp(x1, 0, img.width);
  y0 = std::clamp(y0, 0, img.height);
  y1 = std::clamp(y1, 0, img.height);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) img.set(x, y, c.r, c.g, c.b);
}

// Black through red to yellow as t goes 0 -> 1.
Color Heat(double t) {
  t = std::clamp(t, 0.0, 1.0);
  if (t < 0.5) return {static_cast<std::uint8_t>(std::lround(510 * t)), 0, 0};
  return {255, static_cast<std::uint8_t>(std::lround(510 * (t - 0.5))), 0};
}

Rgb8Image GeoHeatmap(const GeoAggregate& geo) {
  constexpr int kScale = 2;  // pixels per degree
  auto img = Canvas(360 * kScale, 180 * kScale, {20, 30, 60});
  std::int64_t peak = 0;
  for (const auto& c : geo.cells) peak = std::max(peak, c.value);
  const double denom = std::log1p(static_cast<double>(std::max<std::int64_t>(peak, 1)));
  for (const auto& c : geo.cells) {
    const double lat0 = c.lat_bin * geo.resolution, lon0 = c.lon_bin * geo.resolution;
    int x0 = static_cast<int>(std::floor((lon0 + 180) * kScale));
    int x1 = static_cast<int>(std::ceil((lon0 + geo.resolution + 180) * kScale));
    int y0 = static_cast<int>(std::floor((90 - lat0 - geo.resolution) * kScale));
    int y1 = static_cast<int>(std::ceil((90 - lat0) * kScale));
    x1 = std::max(x1, x0 + 1);
    y1 = std::max(y1, y0 + 1);
    const double t = c.value > 0 ? 0.25 + 0.75 * std::log1p(static_cast<double>(c.value)) / denom : 0.1;
    FillRect(img, x0, y0, x1, y1, Heat(t));
  }
  return img;
}

Rgb8Image CountryBar(const std::vector<CountryRow>& rows, std::int64_t cap) {
  constexpr int kBar = 24, kGap = 8, kUnit = 4, kMargin = 10;
  const int w = kMargin * 2 + static_cast<int>(rows.size()) * (kBar + kGap);
  const int h = kMargin * 2 + static_cast<int>(cap) * kUnit;
  auto img = Canvas(w, h, kBackground);
  const int base = h - kMargin;
  FillRect(img, kMargin - 2, base, w - kMargin + 2, base + 1, kAxis);
  for (size_t i = 0; i < rows.size(); ++i) {
    const int x0 = kMargin + static_cast<int>(i) * (kBar + kGap) + kGap / 2;
    std::int64_t filled = 0;
    auto stack = [&](std::int64_t n, Color c) {
      const std::int64_t top = std::min(cap, filled + n);
      if (top > filled)
        FillRect(img, x0, base - static_cast<int>(top) * kUnit, x0 + kBar,
                 base - static_cast<int>(filled) * kUnit, c);
      filled = std::max(filled, top);
    };
    std::int64_t labeled = 0;
    for (int k = 0; k < corpus::kNumClasses; ++k) {
      stack(rows[i].class_counts[k], kClassColors[k]);
      labeled += rows[i].class_counts[k];
    }
    stack(rows[i].post_count - labeled, {210, 210, 210});
  }
  return img;
}

Rgb8Image OverlapHeatmap(const OverlapMatrix& m) {
  constexpr int kCell = 64;
  auto img = Canvas(kCell * corpus::kNumClasses, kCell * corpus::kNumClasses, kBackground);
  std::int64_t peak = 1;
  for (const auto& row : m.cells)
    for (auto v : row) peak = std::max(peak, v);
  for (int i = 0; i < corpus::kNumClasses; ++i)
    for (int j = 0; j < corpus::kNumClasses; ++j)
      FillRect(img, j * kCell + 1, i * kCell + 1, (j + 1) * kCell - 1, (i + 1) * kCell - 1,
               Heat(static_cast<double>(m.cells[i][j]) / static_cast<double>(peak)));
  return img;
}

Rgb8Image EngagementScatter(const EngagementExport& e, std::int64_t likes_cap) {
  constexpr int kSize = 512, kMargin = 12;
  auto img = Canvas(kSize, kSize, kBackground);
  std::int64_t max_likes = 1, max_comments = 1;
  for (const auto& p : e.points) {
    if (likes_cap > 0 && p.likes_count > likes_cap) continue;
    max_likes = std::max(max_likes, p.likes_count);
    max_comments = std::max(max_comments, p.comments_count);
  }
  const double x_span = likes_cap > 0 ? static_cast<double>(likes_cap) : static_cast<double>(max_likes);
  const int plot = kSize - 2 * kMargin;
  FillRect(img, kMargin, kSize - kMargin, kSize - kMargin, kSize - kMargin + 1, kAxis);
  FillRect(img, kMargin - 1, kMargin, kMargin, kSize - kMargin, kAxis);
  for (const auto& p : e.points) {
    if (likes_cap > 0 && p.likes_count > likes_cap) continue;
    const int x = kMargin + static_cast<int>(std::lround(p.likes_count / x_span * plot));
    const int y = kSize - kMargin -
                  static_cast<int>(std::lround(static_cast<double>(p.comments_count) / max_comments * plot));
    FillRect(img, x - 1, y - 1, x + 2, y + 2, kClassColors[corpus::ToInt(p.caption_class) - 1]);
  }
  return img;
}

void Write(const std::filesystem::path& path, const std::string& bytes,
           std::vector<std::filesystem::path>& written) {
  WriteFileBytes(path, bytes);
  written.push_back(path);
}

}  // namespace

std::string GeoCsv(const GeoAggregate& geo) {
  std::string out = "lat_bin,lon_bin,lat_min,lon_min,post_count,likes_sum,comments_sum,value\n";
  for (const auto& c : geo.cells)
    out += std::to_string(c.lat_bin) + "," + std::to_string(c.lon_bin) + "," +
           Fixed(c.lat_bin * geo.resolution, 6) + "," + Fixed(c.lon_bin * geo.resolution, 6) + "," +
           std::to_string(c.post_count) + "," + std::to_string(c.likes_sum) + "," +
           std::to_string(c.comments_sum) + "," + std::to_string(c.value) + "\n";
  return out;
}

std::string CountryCsv(const std::vector<CountryRow>& rows) {
  std::string out = "country_code,post_count,memes_humor,news_neutral,positive,negative,random\n";
  for (const auto& r : rows) {
    out += r.country_code + "," + std::to_string(r.post_count);
    for (auto v : r.class_counts) out += "," + std::to_string(v);
    out += "\n";
  }
  return out;
}

std::string OverlapCsv(const OverlapMatrix& m) {
  std::string out = "image_class,caption_1,caption_2,caption_3,caption_4,caption_5\n";
  if (m.Total() == 0) return out;
  for (int i = 0; i < corpus::kNumClasses; ++i) {
    out += std::to_string(i + 1);
    for (auto v : m.cells[i]) out += "," + std::to_string(v);
    out += "\n";
  }
  return out;
}

std::string EngagementPointsCsv(const EngagementExport& e) {
  std::string out = "post_id,likes_count,comments_count,image_class,caption_class,ratio\n";
  for (const auto& p : e.points)
    out += p.post_id + "," + std::to_string(p.likes_count) + "," + std::to_string(p.comments_count) + "," +
           std::to_string(corpus::ToInt(p.image_class)) + "," + std::to_string(corpus::ToInt(p.caption_class)) +
           "," + Fixed(p.ratio, 9) + "\n";
  return out;
}

std::string EngagementMeansCsv(const EngagementExport& e) {
  std::string out = "label_source,class,posts,mean_ratio\n";
  if (e.points.empty()) return out;
  for (const auto& r : e.means)
    out += std::string(r.source == LabelSource::kCaption ? "caption" : "image") + "," +
           std::to_string(corpus::ToInt(r.label)) + "," + std::to_string(r.posts) + "," +
           Fixed(r.mean_ratio, 9) + "\n";
  return out;
}

std::vector<std::filesystem::path> RenderReports(const ReportSet& reports, const std::filesystem::path& out_dir,
                                                 const ReportOptions& options) {
  if (options.bar_cap < 1) throw ArgumentError("bar_cap must be >= 1");
  if (options.likes_cap < 0) throw ArgumentError("likes_cap must be >= 0");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir))
    throw IoError("cannot create report directory " + out_dir.string());
  std::vector<std::filesystem::path> written;
  const auto country_csv = CountryCsv(reports.countries);
  Write(out_dir / "geo_aggregate.csv", GeoCsv(reports.geo), written);
  Write(out_dir / "country_report.csv", country_csv, written);
  Write(out_dir / "country_bar.csv", country_csv, written);
  Write(out_dir / "overlap_matrix.csv", OverlapCsv(reports.overlap), written);
  Write(out_dir / "engagement_points.csv", EngagementPointsCsv(reports.engagement), written);
  Write(out_dir / "engagement_means.csv", EngagementMeansCsv(reports.engagement), written);
  if (!reports.geo.cells.empty())
    Write(out_dir / "geo_heatmap.png", EncodePng(GeoHeatmap(reports.geo)), written);
  if (!reports.countries.empty())
    Write(out_dir / "country_bar.png", EncodePng(CountryBar(reports.countries, options.bar_cap)), written);
  if (reports.overlap.Total() > 0)
    Write(out_dir / "overlap_heatmap.png", EncodePng(OverlapHeatmap(reports.overlap)), written);
  if (!reports.engagement.points.empty())
    Write(out_dir / "engagement_scatter.png", EncodePng(EngagementScatter(reports.engagement, options.likes_cap)),
          written);
  return written;
}

}  // namespace instasent::analytics
