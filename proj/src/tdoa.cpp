#include "passifi/tdoa.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <thread>
#include <vector>

#include "passifi/errors.hpp"

namespace passifi {

TdoaMeasurement compute_tdoa(const PassiveObservation& obs) {
  if (obs.dropped) throw UnheardResponderError("responder unheard: " + obs.responder_id);
  const std::size_t n = obs.t1_prime.size();
  if (n == 0) throw std::invalid_argument("observation has no exchanges");

  double tdoa_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) tdoa_sum += obs.t4_prime[i] - obs.t1_prime[i];

  TdoaMeasurement m;
  m.responder_id = obs.responder_id;
  m.tdoa_s = tdoa_sum / static_cast<double>(n);
  if (obs.overheard_payload_t1.size() == n && !obs.overheard_payload_t1.empty()) {
    double gap_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      gap_sum += obs.overheard_payload_t4[i] - obs.overheard_payload_t1[i];
    m.payload_gap_s = gap_sum / static_cast<double>(n);
  }
  return m;
}

double lambda_rtt(const TdoaMeasurement& m, const PhysicalConstants& k) {
  if (!m.payload_gap_s) throw std::invalid_argument("measurement carries no payload gap");
  return k.c * (m.tdoa_s - *m.payload_gap_s);
}

double hyperbolic_residual(const Point2D& candidate, const Point2D& responder,
                           const Point2D& initiator, double lambda_m) {
  return (distance(candidate, initiator) - distance(candidate, responder)) -
         (lambda_m + distance(responder, initiator));
}

namespace {

struct Constraint {
  Point2D responder;
  double offset_m;  // lambda + |responder - initiator|
};

std::vector<Constraint> usable_constraints(std::span<const TdoaMeasurement> measurements,
                                           const StationLayout& layout,
                                           const PhysicalConstants& k) {
  std::vector<Constraint> cs;
  for (const auto& m : measurements) {
    if (!m.payload_gap_s) continue;
    const auto idx = layout.responder_index(m.responder_id);
    if (!idx) throw DataError("measurement for unknown responder: " + m.responder_id);
    const Point2D r = layout.responders[*idx].position;
    cs.push_back({r, lambda_rtt(m, k) + distance(r, layout.initiator.position)});
  }
  return cs;
}

double cost_at(const std::vector<Constraint>& cs, const Point2D& initiator, double px, double py) {
  const double di = std::sqrt((px - initiator.x) * (px - initiator.x) +
                              (py - initiator.y) * (py - initiator.y));
  double cost = 0.0;
  for (const auto& c : cs) {
    const double dr = std::sqrt((px - c.responder.x) * (px - c.responder.x) +
                                (py - c.responder.y) * (py - c.responder.y));
    const double r = (di - dr) - c.offset_m;
    cost += r * r;
  }
  return cost;
}

}  // namespace

LocationEstimate multilaterate(std::span<const TdoaMeasurement> measurements,
                               const StationLayout& layout, std::optional<Point2D> initial,
                               const PhysicalConstants& k, const SolverOptions& options) {
  const auto cs = usable_constraints(measurements, layout, k);
  if (cs.size() < 3)
    throw UnderdeterminedError("underdetermined: need >= 3 usable measurements, have " +
                               std::to_string(cs.size()));

  Point2D p;
  if (initial) {
    p = *initial;
  } else {
    for (const auto& r : layout.responders) {
      p.x += r.position.x;
      p.y += r.position.y;
    }
    p.x /= static_cast<double>(layout.responders.size());
    p.y /= static_cast<double>(layout.responders.size());
  }

  const Point2D initiator = layout.initiator.position;
  const std::size_t m = cs.size();
  Eigen::VectorXd residuals(m);
  Eigen::MatrixXd jac(m, 2);
  constexpr double kNormFloor = 1e-9;  // keeps gradients finite when p hits a station

  const auto fill = [&](const Point2D& at) {
    for (std::size_t j = 0; j < m; ++j) {
      const double dix = at.x - initiator.x, diy = at.y - initiator.y;
      const double drx = at.x - cs[j].responder.x, dry = at.y - cs[j].responder.y;
      const double di = std::max(std::sqrt(dix * dix + diy * diy), kNormFloor);
      const double dr = std::max(std::sqrt(drx * drx + dry * dry), kNormFloor);
      residuals(j) = (di - dr) - cs[j].offset_m;
      jac(j, 0) = dix / di - drx / dr;
      jac(j, 1) = diy / di - dry / dr;
    }
  };

  fill(p);
  double cost = residuals.squaredNorm();
  double damping = 1e-3;
  int iterations = 0;
  bool converged = false;

  while (iterations < options.max_iterations) {
    ++iterations;
    const Eigen::Matrix2d jtj = jac.transpose() * jac;
    const Eigen::Vector2d jtr = jac.transpose() * residuals;

    bool accepted = false;
    Eigen::Vector2d step = Eigen::Vector2d::Zero();
    for (int attempt = 0; attempt < 25; ++attempt) {
      const Eigen::Matrix2d damped = jtj + damping * Eigen::Matrix2d::Identity();
      step = damped.ldlt().solve(-jtr);
      const Point2D candidate{p.x + step(0), p.y + step(1)};
      const double candidate_cost = cost_at(cs, initiator, candidate.x, candidate.y);
      if (std::isfinite(candidate_cost) && candidate_cost <= cost) {
        p = candidate;
        cost = candidate_cost;
        damping = std::max(damping / 3.0, 1e-12);
        accepted = true;
        break;
      }
      damping *= 10.0;
    }
    if (!accepted) break;  // damping exhausted; treat like a stalled solve

    fill(p);
    cost = residuals.squaredNorm();
    if (step.norm() < options.step_tolerance_m) {
      converged = true;
      break;
    }
  }

  return LocationEstimate{p, std::sqrt(cost), iterations, converged};
}

Point2D grid_oracle(std::span<const TdoaMeasurement> measurements, const StationLayout& layout,
                    const Rect& bounds, double resolution_m, const PhysicalConstants& k) {
  if (resolution_m <= 0.0) throw std::invalid_argument("resolution must be > 0");
  const auto cs = usable_constraints(measurements, layout, k);
  if (cs.empty()) throw std::invalid_argument("no usable measurements");

  const Point2D initiator = layout.initiator.position;
  const std::size_t nx = static_cast<std::size_t>(std::floor(bounds.w / resolution_m)) + 1;
  const std::size_t ny = static_cast<std::size_t>(std::floor(bounds.h / resolution_m)) + 1;

  struct Best {
    double cost = std::numeric_limits<double>::infinity();
    double x = 0.0, y = 0.0;
  };
  const auto better = [](const Best& a, const Best& b) {
    if (a.cost != b.cost) return a.cost < b.cost;
    if (a.x != b.x) return a.x < b.x;
    return a.y < b.y;
  };

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t n_blocks = std::min<std::size_t>(hw, ny);
  std::vector<Best> block_best(n_blocks);

  const auto scan_rows = [&](std::size_t row_begin, std::size_t row_end, Best& best) {
    for (std::size_t iy = row_begin; iy < row_end; ++iy) {
      const double y = bounds.y + static_cast<double>(iy) * resolution_m;
      for (std::size_t ix = 0; ix < nx; ++ix) {
        const double x = bounds.x + static_cast<double>(ix) * resolution_m;
        const double cost = cost_at(cs, initiator, x, y);
        const Best candidate{cost, x, y};
        if (better(candidate, best)) best = candidate;
      }
    }
  };

  std::vector<std::thread> workers;
  const std::size_t rows_per_block = (ny + n_blocks - 1) / n_blocks;
  for (std::size_t b = 0; b < n_blocks; ++b) {
    const std::size_t begin = b * rows_per_block;
    const std::size_t end = std::min(ny, begin + rows_per_block);
    workers.emplace_back(scan_rows, begin, end, std::ref(block_best[b]));
  }
  for (auto& w : workers) w.join();

  Best best;
  for (const auto& b : block_best)
    if (better(b, best)) best = b;
  return Point2D{best.x, best.y};
}

}  // namespace passifi
