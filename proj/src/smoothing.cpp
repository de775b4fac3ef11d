#include "passifi/smoothing.hpp"

#include <stdexcept>

namespace passifi {

std::vector<double> inter_location_distances(std::span<const Point2D> estimates) {
  const std::size_t v = estimates.size();
  if (v < 2) throw std::invalid_argument("inter-location distances need at least two estimates");
  std::vector<double> d(v, 0.0);
  for (std::size_t i = 0; i < v; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < v; ++j) {
      if (j == i) continue;
      sum += distance(estimates[i], estimates[j]);
    }
    d[i] = sum / static_cast<double>(v - 1);
  }
  return d;
}

std::vector<Point2D> reject_outliers(std::span<const Point2D> estimates) {
  const std::size_t v = estimates.size();
  if (v <= 1) return {estimates.begin(), estimates.end()};
  const auto d = inter_location_distances(estimates);
  double d_avg = 0.0;
  for (double di : d) d_avg += di;
  d_avg /= static_cast<double>(v);
  std::vector<Point2D> survivors;
  for (std::size_t i = 0; i < v; ++i) {
    if (d[i] > d_avg) continue;  // strict: ties survive
    survivors.push_back(estimates[i]);
  }
  return survivors;
}

Point2D temporal_average(std::span<const Point2D> survivors) {
  if (survivors.empty()) throw std::invalid_argument("cannot average an empty window");
  Point2D mean;
  for (const auto& p : survivors) {
    mean.x += p.x;
    mean.y += p.y;
  }
  mean.x /= static_cast<double>(survivors.size());
  mean.y /= static_cast<double>(survivors.size());
  return mean;
}

EstimateWindow smooth(std::span<const Point2D> estimates) {
  if (estimates.empty()) throw std::invalid_argument("cannot smooth an empty window");
  EstimateWindow w;
  w.estimates.assign(estimates.begin(), estimates.end());
  if (estimates.size() >= 2) w.inter_distances_m = inter_location_distances(estimates);
  const auto survivors = reject_outliers(estimates);
  w.survivors = static_cast<int>(survivors.size());
  w.smoothed = temporal_average(survivors);
  return w;
}

}  // namespace passifi
