#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace fwq {

/// Derives a child seed from a root seed and a stream name, so that every
/// component (device generation, quantizer draws, data sampling, ...) owns an
/// independent, individually reproducible stream.
std::uint64_t derive_stream_seed(std::uint64_t root, std::string_view name);

/// Deterministic random stream. All floating-point draws are built from raw
/// 64-bit outputs so results are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

  /// Child stream keyed by name; independent of draws taken from this one.
  Rng stream(std::string_view name) const { return Rng(derive_stream_seed(seed_, name)); }

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Unit-mean exponential scaled by `mean`.
  double exponential(double mean);

  /// Box-Muller normal draw.
  double normal(double mean = 0.0, double sd = 1.0);

  /// Uniform integer in [0, n), rejection-sampled (no modulo bias).
  std::size_t pick_index(std::size_t n);

  template <class T>
  const T& pick(const std::vector<T>& v) {
    return v[pick_index(v.size())];
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[pick_index(i)]);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace fwq
