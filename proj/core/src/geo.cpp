#include "regram/geo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace regram {

namespace {
constexpr double kDegToRad = M_PI / 180.0;
// Never let a cosine-of-latitude factor reach zero (polar degenerate case).
constexpr double kMaxWorkingLatDeg = 89.9;
}  // namespace

double distance_m(double lat_a, double lon_a, double lat_b, double lon_b) {
  const double phi_a = lat_a * kDegToRad;
  const double phi_b = lat_b * kDegToRad;
  const double d_phi = (lat_b - lat_a) * kDegToRad;
  const double d_lam = (lon_b - lon_a) * kDegToRad;
  const double s_phi = std::sin(d_phi / 2.0);
  const double s_lam = std::sin(d_lam / 2.0);
  const double h = s_phi * s_phi + std::cos(phi_a) * std::cos(phi_b) * s_lam * s_lam;
  return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

GridIndex::GridIndex(std::vector<GeoPoint> points, double cell_m)
    : points_(std::move(points)), cell_m_(cell_m) {
  if (!(cell_m > 0.0)) throw std::invalid_argument("GridIndex: cell size must be positive");

  double max_abs_lat = 0.0;
  for (const auto& p : points_) max_abs_lat = std::max(max_abs_lat, std::abs(p.lat));
  max_abs_lat = std::min(max_abs_lat, kMaxWorkingLatDeg);

  cell_deg_lat_ = cell_m_ / kMetersPerDegreeLat;
  // Sized at the most poleward point latitude, so a cell spans at least
  // cell_m meters of longitude at every indexed point.
  cell_deg_lon_ = cell_deg_lat_ / std::cos(max_abs_lat * kDegToRad);

  for (size_t i = 0; i < points_.size(); ++i) {
    cells_[cell_of(points_[i].lat, points_[i].lon)].push_back(i);
  }
}

std::pair<int64_t, int64_t> GridIndex::cell_of(double lat, double lon) const {
  return {int64_t(std::floor(lat / cell_deg_lat_)), int64_t(std::floor(lon / cell_deg_lon_))};
}

std::vector<std::string> GridIndex::radius_query(double lat, double lon, double radius_m,
                                                 const std::string* exclude_id) const {
  if (!(radius_m > 0.0)) throw std::invalid_argument("GridIndex: radius must be positive");
  if (radius_m > cell_m_) {
    throw std::invalid_argument("GridIndex: radius exceeds cell size (contract violation)");
  }
  if (points_.empty()) return {};

  // Conservative degree extents of the query disc, inflated slightly so the
  // exact distance filter below is the only arbiter near the boundary.
  const double inflate = 1.0 + 1e-9;
  const double d_lat = radius_m / kMetersPerDegreeLat * inflate;
  const double worst_lat =
      std::min(std::abs(lat) + d_lat, kMaxWorkingLatDeg) * kDegToRad;
  const double d_lon = radius_m / (kMetersPerDegreeLat * std::cos(worst_lat)) * inflate;

  const auto [row_lo, col_lo] = cell_of(lat - d_lat, lon - d_lon);
  const auto [row_hi, col_hi] = cell_of(lat + d_lat, lon + d_lon);

  std::vector<std::string> out;
  for (int64_t row = row_lo; row <= row_hi; ++row) {
    for (int64_t col = col_lo; col <= col_hi; ++col) {
      const auto it = cells_.find({row, col});
      if (it == cells_.end()) continue;
      for (const size_t idx : it->second) {
        const GeoPoint& p = points_[idx];
        if (exclude_id && p.id == *exclude_id) continue;
        if (distance_m(lat, lon, p.lat, p.lon) < radius_m) out.push_back(p.id);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace regram
