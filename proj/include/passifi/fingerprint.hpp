#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "passifi/geometry.hpp"
#include "passifi/sim.hpp"

namespace passifi {

// Fill value for responders that were not heard in a scan. Equivalent to a
// path asymmetry of 60 m, larger than any time difference a heard responder
// can produce on the supported layouts.
inline constexpr double kUnheardFillSeconds = 200e-9;

// Fixed-length TDoA vector in layout responder order. Raw values are seconds;
// after normalization they are unitless in [0, 1]. The mask tracks which
// entries were actually heard (1) versus filled (0).
struct FeatureVector {
  std::vector<double> values;
  std::vector<std::uint8_t> mask;
};

struct FingerprintRecord {
  FeatureVector features;
  Point2D label;
  bool augmented{false};
};

// Per-feature min/max, fitted on training data only.
struct Normalizer {
  std::vector<double> min_s;
  std::vector<double> max_s;
};

// Snaps a seconds value to a double that survives the nanosecond file
// representation exactly (write as ns, read back, same bits).
double canonical_seconds(double t_s);

/// One scan -> one fixed-length vector: mean TDoA per responder in layout
/// order, 200 ns where the responder was not heard.
FeatureVector build_feature_vector(std::span<const PassiveObservation> observations,
                                   const StationLayout& layout);

Normalizer fit_normalizer(std::span<const FingerprintRecord> training);

/// value' = clamp((value - min) / (max - min), 0, 1); degenerate features
/// (max == min) map to 0.5. The mask passes through unchanged.
FeatureVector normalize(const FeatureVector& fv, const Normalizer& nz);

/// White-Gaussian-noise copies of a raw record. Noise lands on heard entries
/// only; fills stay at 200 ns. Labels are preserved and copies are flagged
/// augmented. Deterministic given seed.
std::vector<FingerprintRecord> augment(const FingerprintRecord& record, double sigma_s,
                                       int copies, std::uint64_t seed);

void write_dataset(const std::string& path, std::span<const FingerprintRecord> records);
std::vector<FingerprintRecord> read_dataset(const std::string& path);

}  // namespace passifi
