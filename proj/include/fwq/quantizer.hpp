#pragma once

#include <span>
#include <vector>

#include "fwq/rng.hpp"

namespace fwq {

/// q-bit signed fixed-point level grid on [-1, 1].
///
/// The executable grid uses spacing 1/A with A = 2^(q-1)-1 positive levels,
/// so the top level is exactly 1 and every |w| <= s is representable. The
/// coarser resolution 1/(2^q-1) is kept separately: it is the spacing the
/// energy optimizer's closed forms assume for noise accounting (quant_noise),
/// and the two must not be conflated.
struct QuantScheme {
  int bits = 0;                 // q
  long long num_pos_levels = 0; // A = 2^(q-1) - 1
  double grid_resolution = 0;   // 1/A, spacing of the executable grid
  double paper_resolution = 0;  // 1/(2^q - 1), used for noise accounting
};

/// Builds the scheme for a bit-width q in [2, 32]; throws InvalidBitWidth
/// otherwise (q = 1 has no usable signed grid).
QuantScheme make_scheme(int q);

/// Stochastic rounding of one value. Requires |w| <= s and s > 0. Rounds to
/// the upper neighbouring level with probability proportional to the offset
/// within the cell, so the expectation over the stream equals w. Values
/// already on the grid are returned unchanged without consuming randomness.
double quantize_value(double w, double s, const QuantScheme& scheme, Rng& rng);

struct QuantizedVector {
  std::vector<double> values;  // each entry = s * (signed level)
  double scale = 1.0;          // s = inf-norm of the source (1 for all-zero input)
  QuantScheme scheme;
};

/// Quantizes each coordinate independently with scale s = max_i |w_i|.
/// All-zero input yields scale 1 and an all-zero output. Any non-finite
/// entry throws InvalidInput.
QuantizedVector quantize_vector(std::span<const double> w, const QuantScheme& scheme, Rng& rng);

/// Per-device quantization noise delta = s / (2^q - 1). This is the value the
/// optimizer uses everywhere, not the executable grid spacing.
double quant_noise(const QuantScheme& scheme, double s);

}  // namespace fwq
