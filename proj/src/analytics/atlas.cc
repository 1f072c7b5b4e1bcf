#include "instasent/analytics/atlas.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "instasent/common/digest.h"
#include "instasent/common/error.h"

namespace instasent::analytics {
namespace {

// Hand-simplified outlines, a few dozen vertices per country at most.
constexpr std::string_view kBuiltinAtlas = R"(
AU -10.7,142.5 -17.0,145.5 -25.0,153.2 -28.6,153.6 -33.0,152.2 -37.5,150.3 -39.0,146.3 -38.0,140.5 -35.0,136.0 -32.0,133.0 -34.0,123.0 -35.0,117.0 -34.0,115.0 -22.0,113.7 -20.0,119.0 -14.0,126.0 -12.0,131.0 -12.0,137.0 -17.5,140.8
BR 5.0,-60.0 4.0,-51.5 -1.0,-48.0 -5.0,-35.0 -8.0,-34.8 -13.0,-38.5 -22.9,-41.9 -23.9,-45.5 -28.5,-48.8 -33.7,-53.4 -30.0,-57.6 -27.0,-55.0 -25.5,-54.6 -22.0,-58.0 -16.5,-60.0 -11.0,-65.3 -9.8,-73.0 -4.5,-70.0 -2.0,-69.5 1.2,-67.0 2.0,-64.0
CA 49.0,-123.0 49.0,-95.0 46.0,-84.5 41.7,-82.5 43.2,-79.0 45.0,-74.7 45.0,-71.5 47.4,-69.0 44.8,-66.9 46.0,-60.0 52.0,-55.7 60.0,-64.5 70.0,-70.0 75.0,-80.0 70.0,-141.0 60.0,-141.0 54.5,-130.5 48.4,-124.7
CN 49.0,87.5 45.0,90.0 42.5,96.0 42.7,101.0 41.5,105.0 42.5,111.0 45.0,111.5 46.5,119.5 49.5,117.8 53.3,121.0 53.0,125.0 48.0,130.0 48.3,134.7 45.0,133.0 42.5,130.6 40.0,124.3 39.5,121.5 37.5,122.5 35.0,119.2 31.0,121.9 26.0,119.5 22.5,114.2 21.5,108.0 22.8,106.5 23.0,101.5 21.2,101.7 24.0,97.7 28.0,97.5 28.0,92.0 27.8,88.9 28.3,86.0 30.3,81.0 32.5,79.2 35.5,78.0 37.0,74.8 39.5,73.6 41.0,77.5 42.5,80.3 45.0,82.5
DE 54.9,8.6 54.4,11.0 54.1,13.8 53.5,14.3 51.0,15.0 50.3,12.2 48.6,13.8 47.5,13.0 47.6,9.6 47.6,7.6 49.0,8.2 49.5,6.3 51.0,5.9 52.5,7.0 53.6,7.0
ES 43.7,-8.0 43.4,-1.8 42.4,3.1 41.0,2.0 39.0,0.0 36.7,-2.1 36.0,-5.6 37.2,-7.4 38.2,-7.0 39.6,-7.5 41.9,-6.6 41.9,-8.9
FR 51.1,2.5 49.5,6.3 49.0,8.2 47.6,7.6 46.2,6.1 45.9,7.0 43.8,7.5 43.3,3.2 42.4,3.1 43.4,-1.8 46.3,-1.2 47.5,-2.9 48.6,-4.8 48.7,-1.6 49.7,-1.3 49.4,0.3 50.1,1.6
GB 58.6,-5.0 58.6,-3.0 55.8,-2.0 53.5,0.2 52.9,1.7 51.4,1.4 50.9,0.5 50.1,-5.7 51.7,-5.2 53.3,-4.6 54.9,-5.1 56.0,-6.3
ID -5.9,105.6 -5.8,108.0 -6.8,110.7 -6.9,112.6 -7.6,114.5 -8.8,114.4 -8.2,111.0 -7.8,108.0 -7.0,106.5 -6.8,105.3
ID 5.6,95.3 4.0,98.0 2.0,100.5 0.5,103.5 -3.0,106.0 -5.9,105.6 -5.5,104.5 -2.0,101.0 2.5,96.0
IN 34.5,74.0 32.5,75.5 30.3,81.0 28.0,88.0 27.0,92.0 28.0,97.0 23.0,93.5 22.0,89.0 21.5,87.0 19.0,84.8 15.5,80.3 13.0,80.3 8.1,77.5 10.0,76.2 15.0,74.0 19.0,72.4 21.0,72.3 23.0,68.5 24.5,71.0 28.0,70.5 30.0,73.5 32.5,74.5
IR 39.7,44.8 38.4,48.9 37.5,49.1 36.7,53.9 37.3,55.6 37.6,59.4 36.6,61.2 34.5,60.6 31.3,61.8 29.9,60.9 27.2,63.3 25.3,61.6 25.7,57.3 27.2,56.3 26.5,54.5 27.0,51.5 29.8,50.2 30.0,48.5 31.0,47.7 33.0,46.0 35.1,46.0 37.1,44.8
IT 47.0,11.0 46.6,13.7 45.6,13.8 44.0,12.6 41.9,15.9 40.0,18.5 38.0,16.0 38.0,15.6 40.0,15.5 41.2,13.0 41.6,12.0 42.4,11.1 44.4,8.8 43.8,7.5 45.9,7.0 46.5,9.0
JP 45.5,141.7 44.0,145.5 42.9,145.5 41.5,141.5 40.5,142.0 38.3,141.6 36.0,140.9 35.0,140.3 34.6,138.3 33.5,135.8 31.0,131.4 31.0,130.2 33.7,129.7 34.4,131.0 35.5,133.0 36.0,136.0 37.5,137.0 37.9,139.0 40.5,140.0 41.5,140.0 42.0,139.8 43.3,140.3
KR 38.6,128.4 37.5,129.4 35.5,129.5 34.5,128.5 34.4,126.3 35.5,126.4 37.0,126.5 37.7,126.0 38.3,127.1
MX 32.7,-117.1 31.3,-111.0 31.8,-106.5 29.5,-104.5 29.0,-102.0 25.9,-97.2 21.5,-97.4 18.5,-95.0 18.2,-91.0 21.5,-90.0 21.5,-87.0 18.0,-88.0 17.8,-89.2 14.5,-92.2 16.0,-95.0 17.0,-101.0 20.0,-105.5 23.0,-106.5 31.0,-113.5 30.0,-115.7
MY 6.7,100.1 6.2,102.3 4.0,103.5 1.4,104.3 1.3,103.5 2.5,101.2 4.0,100.3 5.5,100.2
MY 7.0,116.8 5.0,119.3 4.2,117.7 4.0,115.5 1.5,111.0 1.0,109.6 2.0,109.6 4.5,114.0
PH 18.6,120.6 18.5,122.3 16.0,122.3 14.0,124.2 12.5,124.3 10.0,126.0 7.0,126.6 5.6,125.4 6.9,122.0 9.5,118.0 11.0,119.3 12.5,120.3 14.5,120.3 16.3,119.8
RU 69.0,30.0 70.0,60.0 73.0,80.0 77.0,105.0 72.0,130.0 70.0,160.0 66.0,180.0 60.0,170.0 52.0,157.0 59.0,143.0 53.0,141.0 43.0,132.0 49.0,127.0 53.5,123.0 50.0,117.0 50.0,98.0 49.5,87.0 51.0,80.0 54.0,76.0 51.0,61.0 50.5,55.0 51.0,48.0 47.0,49.0 44.0,47.5 41.5,48.0 43.5,40.0 46.5,38.0 50.0,40.0 52.0,34.0 56.0,28.5 59.5,28.0 60.5,30.0
TR 42.0,26.0 42.1,35.0 41.5,41.5 41.0,43.5 39.5,44.8 37.1,44.8 37.0,42.0 36.6,37.0 36.0,36.0 36.8,30.6 36.7,28.0 38.5,26.3 40.0,26.2 40.6,26.0
US 49.0,-123.0 49.0,-95.0 46.0,-84.5 41.7,-82.5 43.2,-79.0 45.0,-74.7 45.0,-71.5 47.4,-69.0 44.8,-66.9 41.5,-70.0 40.6,-73.0 38.8,-75.0 35.2,-75.5 32.0,-80.8 30.5,-81.4 25.2,-80.4 27.0,-82.5 30.0,-84.0 30.3,-89.0 29.0,-89.4 29.7,-94.0 26.0,-97.2 29.8,-101.4 29.5,-104.5 31.8,-106.5 31.3,-111.0 32.7,-117.1 34.5,-120.6 40.4,-124.4 46.3,-124.1 48.4,-124.7
)";

}  // namespace

double CountryPolygon::Area() const {
  double twice = 0;
  for (size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++)
    twice += ring[j].second * ring[i].first - ring[i].second * ring[j].first;
  return std::abs(twice) / 2;
}

bool CountryPolygon::Contains(double lat, double lon) const {
  // Even-odd ray cast along increasing longitude.
  bool inside = false;
  for (size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
    const auto [lat_i, lon_i] = ring[i];
    const auto [lat_j, lon_j] = ring[j];
    if ((lat_i > lat) != (lat_j > lat)) {
      const double cross = lon_i + (lat - lat_i) * (lon_j - lon_i) / (lat_j - lat_i);
      if (lon < cross) inside = !inside;
    }
  }
  return inside;
}

Atlas Atlas::Parse(std::string_view text) {
  Atlas atlas;
  std::istringstream in{std::string(text)};
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream fields(line);
    CountryPolygon poly;
    if (!(fields >> poly.code)) continue;
    const auto bad = [&](const std::string& why) {
      return ConfigError("atlas line " + std::to_string(line_no) + ": " + why);
    };
    if (poly.code.size() != 2 || !std::isupper(static_cast<unsigned char>(poly.code[0])) ||
        !std::isupper(static_cast<unsigned char>(poly.code[1])))
      throw bad("country code must be two capital letters");
    for (std::string vertex; fields >> vertex;) {
      const auto comma = vertex.find(',');
      double lat, lon;
      try {
        if (comma == std::string::npos) throw std::invalid_argument("no comma");
        lat = std::stod(vertex.substr(0, comma));
        lon = std::stod(vertex.substr(comma + 1));
      } catch (const std::exception&) {
        throw bad("bad vertex '" + vertex + "'");
      }
      if (std::abs(lat) > 90 || std::abs(lon) > 180) throw bad("vertex out of range");
      poly.ring.emplace_back(lat, lon);
    }
    if (poly.ring.size() < 3) throw bad("polygon needs at least three vertices");
    atlas.polygons_.push_back(std::move(poly));
  }
  if (atlas.polygons_.empty()) throw ConfigError("atlas has no polygons");
  std::stable_sort(atlas.polygons_.begin(), atlas.polygons_.end(),
                   [](const CountryPolygon& a, const CountryPolygon& b) { return a.Area() < b.Area(); });
  return atlas;
}

Atlas Atlas::Load(const std::filesystem::path& path) { return Parse(ReadFileBytes(path)); }

const Atlas& Atlas::Builtin() {
  static const Atlas atlas = Parse(kBuiltinAtlas);
  return atlas;
}

std::string Atlas::Resolve(double lat, double lon) const {
  if (!(lat >= -90 && lat <= 90) || !(lon >= -180 && lon <= 180))
    throw ArgumentError("coordinate out of range");
  for (const auto& poly : polygons_)
    if (poly.Contains(lat, lon)) return poly.code;
  return std::string(kUnresolved);
}

}  // namespace instasent::analytics
