#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace passifi::rng {

// SplitMix64 finalizer. Used to derive independent sub-stream seeds so that
// parallel tasks (per responder, per reference point, per record) get
// decorrelated engines from one master seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream));
}

using Engine = std::mt19937_64;

// Uniform in [0, 1) from the engine's raw 64-bit output. The standard
// distributions are implementation-defined; these helpers keep generated
// datasets reproducible across standard-library versions.
inline double uniform01(Engine& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

inline double uniform(Engine& eng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(eng);
}

// Basic Box-Muller. Draws two uniforms and returns one variate; no state.
inline double normal(Engine& eng) {
  double u1 = uniform01(eng);
  const double u2 = uniform01(eng);
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

// Gaussian with standard deviation sigma, hard-limited at +/- 5 sigma so a
// timestamping error can never reorder events separated by more than 10 sigma.
inline double truncated_normal(Engine& eng, double sigma) {
  if (sigma == 0.0) return 0.0;
  const double z = normal(eng);
  const double bound = 5.0;
  const double clipped = z > bound ? bound : (z < -bound ? -bound : z);
  return sigma * clipped;
}

}  // namespace passifi::rng
