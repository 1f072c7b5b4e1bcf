#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace instasent::analytics {

inline constexpr std::string_view kUnresolved = "UNRESOLVED";

// One outer ring, vertices as (latitude, longitude) in degrees. A country may
// own several polygons.
struct CountryPolygon {
  std::string code;  // ISO-3166 alpha-2
  std::vector<std::pair<double, double>> ring;
  double Area() const;  // planar, in square degrees
  bool Contains(double lat, double lon) const;
};

// Offline coordinate-to-country lookup. The text format is one polygon per
// line: "<CODE> lat,lon lat,lon ..." with '#' comments and blank lines
// ignored. Polygons are coarse; where they overlap the smallest one wins.
class Atlas {
 public:
  static const Atlas& Builtin();
  static Atlas Parse(std::string_view text);  // throws ConfigError
  static Atlas Load(const std::filesystem::path& path);

  // Country code, or kUnresolved outside every polygon. Throws ArgumentError
  // for latitude outside [-90, 90] or longitude outside [-180, 180].
  std::string Resolve(double lat, double lon) const;

  const std::vector<CountryPolygon>& polygons() const { return polygons_; }

 private:
  std::vector<CountryPolygon> polygons_;  // ascending area
};

}  // namespace instasent::analytics
