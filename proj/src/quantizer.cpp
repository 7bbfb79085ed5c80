#include "fwq/quantizer.hpp"

#include <cmath>
#include <string>

#include "fwq/errors.hpp"

namespace fwq {

QuantScheme make_scheme(int q) {
  if (q < 2 || q > 32)
    throw InvalidBitWidth("bit-width must be in [2, 32], got " + std::to_string(q));
  QuantScheme s;
  s.bits = q;
  s.num_pos_levels = static_cast<long long>((1ULL << (q - 1)) - 1ULL);
  s.grid_resolution = 1.0 / static_cast<double>(s.num_pos_levels);
  s.paper_resolution = 1.0 / static_cast<double>((1ULL << q) - 1ULL);
  return s;
}

double quantize_value(double w, double s, const QuantScheme& scheme, Rng& rng) {
  if (!std::isfinite(w)) throw InvalidInput("non-finite value");
  if (!(s > 0.0) || !std::isfinite(s)) throw InvalidScale("scale must be positive and finite");
  if (std::abs(w) > s) throw OutOfRange("|w| exceeds scale");
  if (w == 0.0) return 0.0;

  const double levels = static_cast<double>(scheme.num_pos_levels);
  const double sign = (w < 0.0) ? -1.0 : 1.0;
  const double mag = std::abs(w);

  double x = (mag / s) * levels;  // position in grid units, in [0, A]
  double lower = std::floor(x);
  if (lower >= levels) lower = levels - 1.0;

  // Candidate reconstructions use the exact expression the output is built
  // from, so grid points round-trip bit-for-bit and consume no randomness.
  const double lo_val = s * (lower / levels);
  const double hi_val = s * ((lower + 1.0) / levels);
  if (mag == lo_val || mag == hi_val) return w;

  double p_up = x - lower;
  if (p_up < 0.0) p_up = 0.0;
  if (p_up > 1.0) p_up = 1.0;
  return sign * ((rng.uniform() < p_up) ? hi_val : lo_val);
}

QuantizedVector quantize_vector(std::span<const double> w, const QuantScheme& scheme, Rng& rng) {
  if (w.empty()) throw InvalidInput("empty vector");
  double scale = 0.0;
  for (double v : w) {
    if (!std::isfinite(v)) throw InvalidInput("non-finite entry");
    scale = std::max(scale, std::abs(v));
  }
  QuantizedVector out;
  out.scheme = scheme;
  out.values.resize(w.size());
  if (scale == 0.0) {
    out.scale = 1.0;  // all-zero convention: avoids 0/0 in level probabilities
    return out;
  }
  out.scale = scale;
  for (std::size_t i = 0; i < w.size(); ++i) out.values[i] = quantize_value(w[i], scale, scheme, rng);
  return out;
}

double quant_noise(const QuantScheme& scheme, double s) {
  if (!(s > 0.0)) throw InvalidScale("scale must be positive");
  return s * scheme.paper_resolution;
}

}  // namespace fwq
