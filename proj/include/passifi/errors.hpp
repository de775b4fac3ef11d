#pragma once

#include <stdexcept>
#include <string>

namespace passifi {

// Malformed or inconsistent input: files that fail to parse, layouts that
// violate their invariants, incompatible dataset/model pairs.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A passive observation with no usable frames (the whole burst was unheard).
struct UnheardResponderError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Fewer usable measurements than unknowns in a position solve.
struct UnderdeterminedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Iteration failed to produce a finite result (diverged loss, NaN weights).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace passifi
