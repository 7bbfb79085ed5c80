#include "fwq/rng.hpp"

#include <cmath>

namespace fwq {

namespace {

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_stream_seed(std::uint64_t root, std::string_view name) {
  return splitmix64(root ^ fnv1a64(name));
}

double Rng::exponential(double mean) {
  // -log(1-u) with u in [0,1); argument stays in (0,1].
  return -mean * std::log1p(-uniform());
}

double Rng::normal(double mean, double sd) {
  if (has_spare_) {
    has_spare_ = false;
    return mean + sd * spare_;
  }
  double u1 = 0.0;
  do { u1 = uniform(); } while (u1 <= 0.0);
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * 3.14159265358979323846 * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return mean + sd * r * std::cos(theta);
}

std::size_t Rng::pick_index(std::size_t n) {
  if (n <= 1) return 0;
  const std::uint64_t bound = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do { x = next_u64(); } while (x >= bound);
  return static_cast<std::size_t>(x % n);
}

}  // namespace fwq
