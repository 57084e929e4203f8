#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace regram {

inline constexpr double kEarthRadiusM = 6371000.0;
// Meters spanned by one degree of latitude on the sphere above.
inline constexpr double kMetersPerDegreeLat = 111194.92664455873;

// Great-circle (haversine) distance in meters.
double distance_m(double lat_a, double lon_a, double lat_b, double lon_b);

struct GeoPoint {
  std::string id;
  double lat = 0.0;
  double lon = 0.0;
};

// Uniform lat/lon grid over spherical points.  Cells are sized so that one
// cell spans at least `cell_m` meters in both axes near the reference
// latitude; a radius query with r <= cell_m therefore only needs the 3x3
// block of cells around the query point (candidates are still verified with
// the exact haversine distance, strictly less than r).
class GridIndex {
 public:
  GridIndex(std::vector<GeoPoint> points, double cell_m);

  double cell_m() const { return cell_m_; }
  size_t size() const { return points_.size(); }

  // Ids strictly closer than `radius_m`, sorted ascending.  `exclude_id`
  // (when non-null) is never returned.
  std::vector<std::string> radius_query(double lat, double lon, double radius_m,
                                        const std::string* exclude_id = nullptr) const;

  const std::vector<GeoPoint>& points() const { return points_; }

 private:
  std::pair<int64_t, int64_t> cell_of(double lat, double lon) const;

  std::vector<GeoPoint> points_;
  double cell_m_ = 0.0;
  double cell_deg_lat_ = 0.0;
  double cell_deg_lon_ = 0.0;
  std::map<std::pair<int64_t, int64_t>, std::vector<size_t>> cells_;
};

}  // namespace regram
