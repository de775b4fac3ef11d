#pragma once

#include <span>
#include <vector>

#include "passifi/geometry.hpp"

namespace passifi {

// Window of v consecutive location estimates after outlier rejection and
// temporal averaging.
struct EstimateWindow {
  std::vector<Point2D> estimates;
  std::vector<double> inter_distances_m;  // empty when v == 1
  int survivors{0};                       // u
  Point2D smoothed;                       // l*
};

/// d_i = sum_{j != i} |l_i - l_j| / (v - 1). Requires v >= 2.
std::vector<double> inter_location_distances(std::span<const Point2D> estimates);

/// Drops every estimate whose inter-location distance exceeds the window
/// average (strictly). A single-estimate window passes through unchanged; at
/// least one estimate always survives.
std::vector<Point2D> reject_outliers(std::span<const Point2D> estimates);

/// Coordinate-wise mean of the survivors. Requires a non-empty input.
Point2D temporal_average(std::span<const Point2D> survivors);

/// Outlier rejection followed by temporal averaging.
EstimateWindow smooth(std::span<const Point2D> estimates);

}  // namespace passifi
