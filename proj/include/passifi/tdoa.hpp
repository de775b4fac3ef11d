#pragma once

#include <optional>
#include <span>
#include <string>

#include "passifi/geometry.hpp"
#include "passifi/sim.hpp"

namespace passifi {

struct TdoaMeasurement {
  std::string responder_id;
  double tdoa_s{0.0};                       // mean of t4' - t1' over the burst
  std::optional<double> payload_gap_s;      // mean overheard (t4 - t1), for lambda only
  std::optional<double> lambda_rtt_m;
};

/// Timing feature of one overheard burst. Throws UnheardResponderError on a
/// dropped observation.
TdoaMeasurement compute_tdoa(const PassiveObservation& obs);

/// c * (tdoa - (t4 - t1)). Places the passive station on a hyperbola whose
/// foci are the initiating and responding stations.
double lambda_rtt(const TdoaMeasurement& m, const PhysicalConstants& k = {});

/// (|candidate - initiator| - |candidate - responder|) - (lambda + |responder - initiator|).
/// Zero iff the candidate lies on the measured hyperbola branch.
double hyperbolic_residual(const Point2D& candidate, const Point2D& responder,
                           const Point2D& initiator, double lambda_m);

struct LocationEstimate {
  Point2D point;
  double residual_norm_m{0.0};
  int iterations{0};
  bool converged{false};
};

struct SolverOptions {
  int max_iterations{100};
  double step_tolerance_m{1e-6};
};

/// Damped Gauss-Newton fit of the passive position to all hyperbolic
/// constraints. Needs at least three usable measurements; initial guess
/// defaults to the responder centroid.
LocationEstimate multilaterate(std::span<const TdoaMeasurement> measurements,
                               const StationLayout& layout,
                               std::optional<Point2D> initial = std::nullopt,
                               const PhysicalConstants& k = {},
                               const SolverOptions& options = {});

/// Brute-force argmin of the squared-residual sum over a regular grid.
/// Ties break toward smaller x, then smaller y. Verification oracle for the
/// iterative solver; exhaustive by construction.
Point2D grid_oracle(std::span<const TdoaMeasurement> measurements, const StationLayout& layout,
                    const Rect& bounds, double resolution_m, const PhysicalConstants& k = {});

}  // namespace passifi
