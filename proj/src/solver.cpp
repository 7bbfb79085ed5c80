#include "fwq/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fwq/errors.hpp"

namespace fwq {

namespace {

constexpr double kLn2 = 0.6931471805599453;
constexpr int kBisectCap = 200;

struct Terms {
  double p_cp_w = 0;
  double time_c1_s = 0;       // gpu time intercept
  double time_c2_s = 0;       // gpu time slope per bit
  double alpha1 = 0;          // comm_time = alpha1 / b
  double pi2 = 0;
  double qt_mem_cap = 0;      // log2 of the largest memory-feasible bit-width
};

double qt_lo_of(const Scenario& s) {
  return std::log2(static_cast<double>(*std::min_element(s.q_set.begin(), s.q_set.end())));
}
double qt_hi_of(const Scenario& s) {
  return std::log2(static_cast<double>(*std::max_element(s.q_set.begin(), s.q_set.end())));
}

std::vector<Terms> derive_terms(const Scenario& s) {
  std::vector<Terms> out(s.devices.size());
  const double qt_hi = qt_hi_of(s);
  for (std::size_t i = 0; i < s.devices.size(); ++i) {
    const auto& d = s.devices[i];
    auto lin = linearize_gpu_time(d.gpu);
    out[i].p_cp_w = gpu_power(d.gpu);
    out[i].time_c1_s = lin.intercept_s;
    out[i].time_c2_s = lin.slope_s_per_bit;
    out[i].alpha1 = alpha1(d.radio, s.net);
    out[i].pi2 = d.pi_weight * d.pi_weight;
    // c3(q) U <= C  <=>  q <= 32 C / U
    const double q_cap = 32.0 * d.mem_capacity_mb / d.model_size_mb;
    out[i].qt_mem_cap = std::min(qt_hi, std::log2(std::max(q_cap, 1e-12)));
  }
  return out;
}

double phi_of(const std::vector<Terms>& t, const ConvergenceCoeffs& c,
              std::span<const double> q_tilde) {
  double sum = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i)
    sum += t[i].pi2 * c.s_scale / (std::exp2(std::exp2(q_tilde[i])) - 1.0);
  return c.a3 * sum;
}

double rho_of(double h, double a1, double a2, double t_cm, double t_cp) {
  const double n = a1 * h + a2;
  return n * n * (t_cm / h + t_cp);
}

// Unique positive root of h^3 + alpha h^2 + beta (alpha > 0, beta < 0),
// closed form first, then safeguarded Newton to remove the trig-branch noise.
double positive_cubic_root(double alpha, double beta) {
  const double disc = alpha * alpha * alpha * beta / 27.0 + beta * beta / 4.0;
  double h;
  if (disc >= 0.0) {
    const double sq = std::sqrt(disc);
    const double shift = -alpha * alpha * alpha / 27.0 - beta / 2.0;
    h = std::cbrt(shift + sq) + std::cbrt(shift - sq) - alpha / 3.0;
  } else {
    const double p = -alpha * alpha / 3.0;
    const double q = 2.0 * alpha * alpha * alpha / 27.0 + beta;
    const double m = 2.0 * std::sqrt(-p / 3.0);
    const double arg = std::clamp(3.0 * q / (p * m), -1.0, 1.0);
    const double theta = std::acos(arg) / 3.0;
    h = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < 3; ++k)
      h = std::max(h, m * std::cos(theta - 2.0 * 3.14159265358979323846 * k / 3.0) - alpha / 3.0);
  }
  h = std::max(h, 1e-300);
  const auto f = [&](double x) { return x * x * x + alpha * x * x + beta; };
  double lo = 0.0, hi = std::max(2.0 * h, 1e-12);
  while (f(hi) < 0.0) hi *= 2.0;
  for (int it = 0; it < kBisectCap; ++it) {
    const double fh = f(h);
    if (fh > 0.0) hi = h; else lo = h;
    const double d = 3.0 * h * h + 2.0 * alpha * h;
    double next = d > 0.0 ? h - fh / d : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - h) <= 1e-16 * std::max(next, 1e-300)) { h = next; break; }
    h = next;
  }
  return h;
}

double qtilde_from_lambda(double lambda) {
  // x^2 - (2+lambda) x + 1 = 0, root > 1, written to stay accurate near 1.
  const double log2x = std::log1p((lambda + std::sqrt(lambda * (lambda + 4.0))) / 2.0) / kLn2;
  if (!(log2x > 0.0)) return -std::numeric_limits<double>::infinity();
  return std::log2(log2x);
}

double stationarity_from_terms(double mu1, double mu2_i, const Terms& t,
                               const ConvergenceCoeffs& c, double r_total) {
  if (t.time_c2_s <= 0.0) return std::numeric_limits<double>::infinity();
  const double denom = r_total * t.time_c2_s * (t.p_cp_w + mu2_i);
  const double lambda = kLn2 * mu1 * c.a3 * t.pi2 * c.s_scale / denom;
  return qtilde_from_lambda(lambda);
}

int project_q(double q_tilde, const Scenario& s, const Terms& t) {
  // Nearest element of q_set in log2 distance among the memory-feasible ones;
  // ties go to the larger bit-width.
  int best = -1;
  double best_dist = std::numeric_limits<double>::infinity();
  for (int q : s.q_set) {
    if (std::log2(static_cast<double>(q)) > t.qt_mem_cap + 1e-12) continue;
    const double dist = std::abs(std::log2(static_cast<double>(q)) - q_tilde);
    if (dist < best_dist - 1e-15 ||
        (std::abs(dist - best_dist) <= 1e-15 && q > best)) {
      best = q;
      best_dist = dist;
    }
  }
  return best;  // -1 when no feasible bit-width exists
}

}  // namespace

void validate(const Scenario& s) {
  if (s.devices.empty()) throw ConfigError("scenario needs at least one device");
  if (!(s.t_max_s > 0)) throw ConfigError("t_max must be positive");
  if (s.q_set.empty()) throw ConfigError("q_set must be non-empty");
  for (int q : s.q_set)
    if (q < 2 || q > 32) throw ConfigError("q_set entries must lie in [2, 32]");
  double pi_sum = 0.0;
  for (const auto& d : s.devices) {
    pi_sum += d.pi_weight;
    if (!(d.pi_weight > 0)) throw ConfigError("device weights must be positive");
    if (!(d.mem_capacity_mb > 0) || !(d.model_size_mb > 0))
      throw ConfigError("memory capacity and model size must be positive");
    bool any = false;
    for (int q : s.q_set) any = any || memory_feasible(d, q);
    if (!any) throw ConfigError("device " + d.id + " has no memory-feasible bit-width");
  }
  if (std::abs(pi_sum - 1.0) > 1e-9) throw ConfigError("device weights must sum to 1");
  if (!(s.net.b_max_hz > 0) || !(s.net.noise_w > 0) || !(s.net.payload_bits > 0))
    throw ConfigError("network parameters must be positive");
}

double relaxed_objective(const Scenario& s, double h, double eps_q,
                         std::span<const double> q_bits, std::span<const double> b_hz) {
  const auto terms = derive_terms(s);
  const double k = rounds_required(h, eps_q, s.coeffs);
  double sum = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const double e_cm = s.devices[i].radio.p_cm_w * terms[i].alpha1 / b_hz[i];
    const double e_cp = terms[i].p_cp_w * (terms[i].time_c2_s * q_bits[i] + terms[i].time_c1_s);
    sum += e_cm + h * e_cp;
  }
  return k * sum;
}

double objective(const Scenario& s, const Allocation& a) {
  std::vector<double> q(a.q.begin(), a.q.end());
  return relaxed_objective(s, static_cast<double>(a.h), a.eps_q, q, a.b_hz);
}

bool ConstraintReport::feasible(double rel_tol) const {
  return first_violation(rel_tol).empty();
}

std::string ConstraintReport::first_violation(double rel_tol) const {
  for (double m : memory_slack_mb)
    if (m < -rel_tol * scale_memory) return "memory";
  if (quant_error_slack < -rel_tol * scale_eps) return "quantization-error";
  if (convergence_slack < -rel_tol * scale_eps) return "convergence";
  for (double d : deadline_slack_s)
    if (d < -rel_tol * scale_time) return "deadline";
  if (bandwidth_slack_hz < -rel_tol * scale_bandwidth) return "bandwidth";
  return {};
}

ConstraintReport check_feasible(const Scenario& s, const Allocation& a) {
  const auto terms = derive_terms(s);
  ConstraintReport r;
  r.scale_eps = s.coeffs.eps;
  r.scale_time = s.t_max_s;
  r.scale_bandwidth = s.net.b_max_hz;
  r.scale_memory = 1.0;
  std::vector<double> q(a.q.begin(), a.q.end());
  for (std::size_t i = 0; i < s.devices.size(); ++i) {
    const auto& d = s.devices[i];
    r.memory_slack_mb.push_back(d.mem_capacity_mb - storage_scale(q[i]) * d.model_size_mb);
    r.scale_memory = std::max(r.scale_memory, d.mem_capacity_mb);
    const double t_round = a.h * (terms[i].time_c2_s * q[i] + terms[i].time_c1_s) +
                           terms[i].alpha1 / a.b_hz[i];
    r.deadline_slack_s.push_back(s.t_max_s - a.k_rounds * t_round);
  }
  const double phi = quant_error_term(s.devices, std::span<const double>(q), s.coeffs);
  r.quant_error_slack = a.eps_q - phi;
  const double conv = (s.coeffs.a1 * a.h + s.coeffs.a2) /
                          std::sqrt(s.coeffs.m_batch * a.h * a.k_rounds) +
                      phi;
  r.convergence_slack = s.coeffs.eps - conv;
  r.bandwidth_slack_hz =
      s.net.b_max_hz - std::accumulate(a.b_hz.begin(), a.b_hz.end(), 0.0);
  return r;
}

double eps_q_min(std::span<const double> q_bits, const ConvergenceCoeffs& c,
                 std::span<const DeviceProfile> devices) {
  return quant_error_term(devices, q_bits, c);
}

std::pair<double, double> h_bounds(const Scenario& s, std::span<const double> q_bits,
                                   std::span<const double> b_hz, double eps_q) {
  const auto terms = derive_terms(s);
  const double gap = s.coeffs.eps - eps_q;
  if (!(gap > 0)) throw QuantErrorInfeasible("eps_q >= eps in deadline window");
  const double thr = s.coeffs.m_batch * gap * gap * s.t_max_s;

  constexpr int kGrid = 512;
  const double h_lo_probe = 1e-4;
  double lo = h_lo_probe, hi = kHCap;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const double t_cm = terms[i].alpha1 / b_hz[i];
    const double t_cp = terms[i].time_c2_s * q_bits[i] + terms[i].time_c1_s;
    const auto rho = [&](double h) { return rho_of(h, s.coeffs.a1, s.coeffs.a2, t_cm, t_cp); };

    // Log-spaced scan for the sub-threshold window, then bisect its edges.
    int first = -1, last = -1;
    double grid[kGrid];
    const double log_lo = std::log(h_lo_probe), log_hi = std::log(kHCap);
    for (int g = 0; g < kGrid; ++g) {
      grid[g] = std::exp(log_lo + (log_hi - log_lo) * g / (kGrid - 1));
      if (rho(grid[g]) <= thr) {
        if (first < 0) first = g;
        last = g;
      }
    }
    if (first < 0) throw DeadlineInfeasible("no h satisfies the deadline window");

    double dev_lo = grid[first];
    if (first > 0) {
      double a = grid[first - 1], b = grid[first];
      for (int it = 0; it < 100; ++it) {
        const double m = 0.5 * (a + b);
        (rho(m) <= thr ? b : a) = m;
      }
      dev_lo = b;
    }
    double dev_hi = grid[last];
    if (last < kGrid - 1) {
      double a = grid[last], b = grid[last + 1];
      for (int it = 0; it < 100; ++it) {
        const double m = 0.5 * (a + b);
        (rho(m) <= thr ? a : b) = m;
      }
      dev_hi = a;
    }
    lo = std::max(lo, dev_lo);
    hi = std::min(hi, dev_hi);
  }
  lo = std::max(lo, 1.0);
  hi = std::min(hi, kHCap);
  if (lo > hi) throw DeadlineInfeasible("deadline windows of the devices do not intersect");
  return {lo, hi};
}

double cardano_h(double e_cm_j, double e_cp_j_per_step, const ConvergenceCoeffs& c) {
  if (!(e_cp_j_per_step > 0)) throw InvalidInput("per-step compute energy must be positive");
  if (e_cm_j < 0) throw InvalidInput("communication energy must be non-negative");
  if (e_cm_j == 0.0) return 0.0;  // Psi strictly increasing; caller clips up
  const double alpha = (c.a1 * e_cm_j + 2.0 * c.a2 * e_cp_j_per_step) / (2.0 * c.a1 * e_cp_j_per_step);
  const double beta = -(c.a2 * c.a2 * e_cm_j) / (2.0 * c.a1 * c.a1 * e_cp_j_per_step);
  return positive_cubic_root(alpha, beta);
}

std::pair<double, double> solve_h(const Scenario& s, std::span<const double> q_bits,
                                  std::span<const double> b_hz) {
  const auto terms = derive_terms(s);
  const double eps_q = eps_q_min(q_bits, s.coeffs, s.devices);
  if (eps_q >= s.coeffs.eps)
    throw QuantErrorInfeasible("smallest reachable quantization error exceeds eps");
  double e_cm = 0.0, e_cp = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    e_cm += s.devices[i].radio.p_cm_w * terms[i].alpha1 / b_hz[i];
    e_cp += terms[i].p_cp_w * (terms[i].time_c2_s * q_bits[i] + terms[i].time_c1_s);
  }
  const auto [lo, hi] = h_bounds(s, q_bits, b_hz, eps_q);
  const double h = std::clamp(cardano_h(e_cm, e_cp, s.coeffs), lo, hi);
  return {h, eps_q};
}

double stationarity_qtilde(double mu1, double mu2_i, const DeviceProfile& d,
                           const ConvergenceCoeffs& c, double r_total) {
  const auto lin = linearize_gpu_time(d.gpu);
  const double denom = r_total * lin.slope_s_per_bit * (gpu_power(d.gpu) + mu2_i);
  const double lambda = kLn2 * mu1 * c.a3 * d.pi_weight * d.pi_weight * c.s_scale / denom;
  if (!(lambda > 0)) throw InvalidMultiplier("stationarity requires a positive multiplier");
  return qtilde_from_lambda(lambda);
}

QSolve solve_q_given_b(const Scenario& s, double h, double eps_q,
                       std::span<const double> b_prev_hz) {
  const auto terms = derive_terms(s);
  const std::size_t n = terms.size();
  const double qt_lo = qt_lo_of(s);
  const double k = rounds_required(h, eps_q, s.coeffs);
  const double r_total = h * k;

  QSolve out;
  out.caps.resize(n);
  out.mu2.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double cap = terms[i].qt_mem_cap;
    if (terms[i].time_c2_s > 0.0) {
      // Per-device deadline at the previous bandwidth caps the bit-width.
      const double budget = s.t_max_s / k - terms[i].alpha1 / b_prev_hz[i];
      const double q_max_dl = (budget / h - terms[i].time_c1_s) / terms[i].time_c2_s;
      if (!(q_max_dl > 0.0))
        throw DeadlineInfeasible("deadline leaves no compute budget for device " +
                                 s.devices[i].id);
      cap = std::min(cap, std::log2(q_max_dl));
    }
    if (cap < qt_lo - 1e-9)
      throw DeadlineInfeasible("device " + s.devices[i].id +
                               " cannot meet the deadline at the smallest bit-width");
    out.caps[i] = std::max(cap, qt_lo);
  }

  const auto q_at = [&](double mu1) {
    std::vector<double> qt(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double raw = mu1 > 0.0
                             ? stationarity_from_terms(mu1, 0.0, terms[i], s.coeffs, r_total)
                             : -std::numeric_limits<double>::infinity();
      qt[i] = std::clamp(raw, qt_lo, out.caps[i]);
    }
    return qt;
  };

  const double phi_caps = phi_of(terms, s.coeffs, out.caps);
  if (phi_caps > eps_q * (1.0 + 1e-9))
    throw QuantErrorInfeasible("eps_q unreachable even at the maximal bit-widths");

  std::vector<double> at_lo(n, qt_lo);
  if (phi_of(terms, s.coeffs, at_lo) <= eps_q) {
    // Error budget is slack at the cheapest bits; no pressure needed.
    out.q_tilde = std::move(at_lo);
    out.mu1 = 0.0;
    return out;
  }

  double mu_hi = 1.0;
  int guard = 0;
  while (phi_of(terms, s.coeffs, q_at(mu_hi)) > eps_q && ++guard < 2000) mu_hi *= 2.0;
  double mu_lo = 0.0;
  for (int it = 0; it < kBisectCap; ++it) {
    const double mid = 0.5 * (mu_lo + mu_hi);
    if (phi_of(terms, s.coeffs, q_at(mid)) > eps_q) mu_lo = mid; else mu_hi = mid;
  }
  out.mu1 = 0.5 * (mu_lo + mu_hi);
  out.q_tilde = q_at(out.mu1);

  // Deadline multipliers by complementary slackness: only devices pinned to a
  // deadline cap below their stationarity value carry a positive mu2.
  for (std::size_t i = 0; i < n; ++i) {
    if (out.q_tilde[i] < out.caps[i] - 1e-12) continue;
    if (out.caps[i] >= terms[i].qt_mem_cap - 1e-12) continue;  // memory, not deadline
    const double x = std::exp2(std::exp2(out.q_tilde[i]));
    const double pressure =
        kLn2 * out.mu1 * s.coeffs.a3 * terms[i].pi2 * s.coeffs.s_scale * x / ((x - 1.0) * (x - 1.0));
    out.mu2[i] = std::max(0.0, pressure / (r_total * terms[i].time_c2_s) - terms[i].p_cp_w);
  }
  return out;
}

BSolve solve_b_given_q(const Scenario& s, double h, double eps_q,
                       std::span<const double> q_tilde, BandwidthRule rule) {
  const auto terms = derive_terms(s);
  const std::size_t n = terms.size();
  const double k = rounds_required(h, eps_q, s.coeffs);
  const double r_total = h * k;

  BSolve out;
  out.b_min_hz.resize(n);
  double sum_min = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t_cp = terms[i].time_c2_s * std::exp2(q_tilde[i]) + terms[i].time_c1_s;
    const double t_rem = s.t_max_s - r_total * t_cp;
    if (!(t_rem > 0))
      throw DeadlineInfeasible("compute alone exceeds the deadline for device " +
                               s.devices[i].id);
    out.b_min_hz[i] = k * terms[i].alpha1 / t_rem;
    sum_min += out.b_min_hz[i];
  }
  if (sum_min > s.net.b_max_hz * (1.0 + 1e-12))
    throw BandwidthInfeasible("deadline-driven bandwidth floors exceed the budget");

  const auto unconstrained = [&](std::size_t i, double omega) {
    const double pa = s.devices[i].radio.p_cm_w * terms[i].alpha1;
    return rule == BandwidthRule::KktSqrt ? std::sqrt(k * pa / omega)
                                          : std::sqrt(k) * pa / omega;
  };
  const auto total = [&](double omega) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      sum += std::max(out.b_min_hz[i], unconstrained(i, omega));
    return sum;
  };

  // Seed from the floor-free closed form, then bracket and bisect.
  double seed;
  if (rule == BandwidthRule::KktSqrt) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      acc += std::sqrt(k * s.devices[i].radio.p_cm_w * terms[i].alpha1);
    seed = (acc / s.net.b_max_hz) * (acc / s.net.b_max_hz);
  } else {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      acc += s.devices[i].radio.p_cm_w * terms[i].alpha1;
    seed = std::sqrt(k) * acc / s.net.b_max_hz;
  }
  double om_lo = seed, om_hi = seed;
  int guard = 0;
  while (total(om_lo) < s.net.b_max_hz && ++guard < 2000) om_lo *= 0.5;
  guard = 0;
  while (total(om_hi) > s.net.b_max_hz && ++guard < 2000) {
    om_hi *= 2.0;
    if (total(om_hi) - s.net.b_max_hz <= 1e-12 * s.net.b_max_hz) break;
  }
  for (int it = 0; it < kBisectCap; ++it) {
    const double mid = 0.5 * (om_lo + om_hi);
    (total(mid) > s.net.b_max_hz ? om_lo : om_hi) = mid;
  }
  out.omega = 0.5 * (om_lo + om_hi);
  out.b_hz.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    out.b_hz[i] = std::max(out.b_min_hz[i], unconstrained(i, out.omega));
  return out;
}

namespace {

Allocation build_allocation(const Scenario& s, const std::vector<Terms>& terms, int h_int,
                            const std::vector<int>& q_int, const std::vector<double>& b) {
  Allocation a;
  a.h = h_int;
  a.q = q_int;
  a.b_hz = b;
  std::vector<double> qd(q_int.begin(), q_int.end());
  a.eps_q = eps_q_min(qd, s.coeffs, s.devices);
  a.k_rounds = rounds_required(static_cast<double>(h_int), a.eps_q, s.coeffs);
  a.k_rounds_ceil = static_cast<long long>(std::ceil(a.k_rounds - 1e-12));
  a.per_device.resize(s.devices.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < s.devices.size(); ++i) {
    DeviceEnergy& e = a.per_device[i];
    e.comp_time_s = terms[i].time_c2_s * qd[i] + terms[i].time_c1_s;
    e.comm_time_s = terms[i].alpha1 / b[i];
    e.comp_energy_j = h_int * terms[i].p_cp_w * e.comp_time_s;
    e.comm_energy_j = s.devices[i].radio.p_cm_w * e.comm_time_s;
    sum += e.comp_energy_j + e.comm_energy_j;
  }
  a.objective_j = a.k_rounds * sum;
  return a;
}

}  // namespace

SolveResult iterate(const Scenario& s, const SolveOptions& opt) {
  SolveResult res;
  const auto terms = derive_terms(s);
  const std::size_t n = s.devices.size();
  const double qt_lo = qt_lo_of(s);

  std::vector<double> qt(n);
  if (opt.fixed_q) {
    if (opt.fixed_q->size() != n) {
      res.infeasible_reason = "fixed bit-width list does not match the device count";
      return res;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!memory_feasible(s.devices[i], (*opt.fixed_q)[i])) {
        res.infeasible_reason = "memory";
        return res;
      }
      qt[i] = std::log2(static_cast<double>((*opt.fixed_q)[i]));
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      if (terms[i].qt_mem_cap < qt_lo - 1e-12) {
        res.infeasible_reason = "memory";
        return res;
      }
      int best = -1;
      for (int q : s.q_set)
        if (memory_feasible(s.devices[i], q)) best = std::max(best, q);
      qt[i] = std::log2(static_cast<double>(best));
    }
  }
  std::vector<double> b(n, s.net.b_max_hz / static_cast<double>(n));

  double h = 1.0, eps_q = 0.0, mu1 = 0.0, omega = 0.0;
  std::vector<double> mu2(n, 0.0), caps(qt);
  double prev_obj = std::numeric_limits<double>::infinity();

  try {
    for (int pass = 0; pass < opt.max_outer; ++pass) {
      std::vector<double> q_bits(n);
      for (std::size_t i = 0; i < n; ++i) q_bits[i] = std::exp2(qt[i]);
      std::tie(h, eps_q) = solve_h(s, q_bits, b);

      if (!opt.fixed_q) {
        QSolve qs = solve_q_given_b(s, h, eps_q, b);
        qt = std::move(qs.q_tilde);
        caps = std::move(qs.caps);
        mu1 = qs.mu1;
        mu2 = std::move(qs.mu2);
      }
      BSolve bs = solve_b_given_q(s, h, eps_q, qt, opt.bw_rule);
      b = std::move(bs.b_hz);
      omega = bs.omega;

      for (std::size_t i = 0; i < n; ++i) q_bits[i] = std::exp2(qt[i]);
      const double obj = relaxed_objective(s, h, eps_q, q_bits, b);
      res.objective_history.push_back(obj);
      res.outer_iters = pass + 1;
      if (std::abs(prev_obj - obj) <= opt.rel_tol * std::max(std::abs(prev_obj), 1e-30)) {
        res.converged = true;
        break;
      }
      prev_obj = obj;
    }

    // Round and re-solve the bandwidth once for the integer point.
    const int h_int = static_cast<int>(std::max(1LL, std::llround(h)));
    std::vector<int> q_int(n);
    for (std::size_t i = 0; i < n; ++i) {
      q_int[i] = opt.fixed_q ? (*opt.fixed_q)[i] : project_q(qt[i], s, terms[i]);
      if (q_int[i] < 0) {
        res.infeasible_reason = "memory";
        return res;
      }
    }
    std::vector<double> q_round(n);
    for (std::size_t i = 0; i < n; ++i) q_round[i] = q_int[i];
    const double eps_q_round = eps_q_min(q_round, s.coeffs, s.devices);
    if (eps_q_round >= s.coeffs.eps) {
      res.infeasible_reason = "quantization-error";
      return res;
    }
    std::vector<double> qt_round(n);
    for (std::size_t i = 0; i < n; ++i) qt_round[i] = std::log2(q_round[i]);
    BSolve bs2 = solve_b_given_q(s, static_cast<double>(h_int), eps_q_round, qt_round, opt.bw_rule);

    res.alloc = build_allocation(s, terms, h_int, q_int, bs2.b_hz);
    res.alloc.h_relaxed = h;
    res.alloc.eps_q_relaxed = eps_q;
    res.alloc.k_relaxed = rounds_required(h, eps_q, s.coeffs);
    res.alloc.q_tilde = qt;
    res.alloc.q_tilde_caps = caps;
    res.alloc.b_relaxed_hz = b;
    std::vector<double> q_bits(n);
    for (std::size_t i = 0; i < n; ++i) q_bits[i] = std::exp2(qt[i]);
    res.alloc.objective_relaxed_j = relaxed_objective(s, h, eps_q, q_bits, b);
    res.alloc.mu1 = mu1;
    res.alloc.mu2 = mu2;
    res.alloc.omega = omega;
    res.alloc.omega_round = bs2.omega;

    res.report = check_feasible(s, res.alloc);
    res.feasible = res.report.feasible();
    if (!res.feasible) res.infeasible_reason = res.report.first_violation();
  } catch (const Infeasible& e) {
    res.feasible = false;
    res.infeasible_reason = e.what();
  }
  return res;
}

SolveResult brute_force(const Scenario& s, const BruteForceGrids& g) {
  SolveResult res;
  const auto terms = derive_terms(s);
  const std::size_t n = s.devices.size();

  std::vector<std::vector<int>> feasible_q(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (int q : s.q_set)
      if (memory_feasible(s.devices[i], q)) feasible_q[i].push_back(q);
    if (feasible_q[i].empty()) {
      res.infeasible_reason = "memory";
      return res;
    }
  }

  double best_obj = std::numeric_limits<double>::infinity();
  Allocation best;

  std::vector<std::size_t> pick(n, 0);
  std::vector<int> q(n);
  std::vector<double> qd(n), qt(n), b(n);

  const auto consider = [&](int h, const std::vector<double>& cand, double eps_q) {
    const double obj = relaxed_objective(s, static_cast<double>(h), eps_q, qd, cand);
    if (obj < best_obj) {
      best_obj = obj;
      best = build_allocation(s, terms, h, q, cand);
      best.h_relaxed = h;
      best.eps_q_relaxed = eps_q;
      best.k_relaxed = best.k_rounds;
      best.q_tilde = qt;
      best.q_tilde_caps = qt;
      best.b_relaxed_hz = cand;
      best.objective_relaxed_j = obj;
      best.mu2.assign(n, 0.0);
    }
  };

  for (int h = g.h_min; h <= g.h_max; ++h) {
    std::fill(pick.begin(), pick.end(), 0);
    while (true) {
      for (std::size_t i = 0; i < n; ++i) {
        q[i] = feasible_q[i][pick[i]];
        qd[i] = q[i];
        qt[i] = std::log2(qd[i]);
      }
      const double eps_q = eps_q_min(qd, s.coeffs, s.devices);
      if (eps_q < s.coeffs.eps) {
        const double k = rounds_required(static_cast<double>(h), eps_q, s.coeffs);
        const double r_total = h * k;
        bool ok = true;
        std::vector<double> b_min(n);
        double sum_min = 0.0;
        for (std::size_t i = 0; i < n && ok; ++i) {
          const double t_cp = terms[i].time_c2_s * qd[i] + terms[i].time_c1_s;
          const double t_rem = s.t_max_s - r_total * t_cp;
          if (!(t_rem > 0)) { ok = false; break; }
          b_min[i] = k * terms[i].alpha1 / t_rem;
          sum_min += b_min[i];
        }
        if (ok && sum_min <= s.net.b_max_hz) {
          const double free_hz = s.net.b_max_hz - sum_min;
          // Simplex grid over the spare bandwidth on top of the floors.
          std::vector<int> comp(n, 0);
          comp[0] = g.b_steps;
          while (true) {
            for (std::size_t i = 0; i < n; ++i)
              b[i] = b_min[i] + free_hz * comp[i] / std::max(1, g.b_steps);
            consider(h, b, eps_q);
            // next composition of b_steps into n parts
            std::size_t j = 0;
            while (j + 1 < n && comp[j] == 0) ++j;
            if (j + 1 >= n) break;
            const int carry = comp[j];
            comp[j] = 0;
            comp[j + 1] += 1;
            comp[0] = carry - 1;
          }
          try {
            BSolve bs = solve_b_given_q(s, static_cast<double>(h), eps_q, qt);
            consider(h, bs.b_hz, eps_q);
          } catch (const Infeasible&) {
          }
        }
      }
      // odometer over per-device q choices
      std::size_t i = 0;
      while (i < n && ++pick[i] == feasible_q[i].size()) pick[i++] = 0;
      if (i == n) break;
    }
  }

  if (!std::isfinite(best_obj)) {
    res.infeasible_reason = "no feasible (h, q, b) point on the search grid";
    return res;
  }
  res.alloc = std::move(best);
  res.report = check_feasible(s, res.alloc);
  res.feasible = res.report.feasible();
  res.converged = true;
  res.outer_iters = 1;
  if (!res.feasible) res.infeasible_reason = res.report.first_violation();
  return res;
}

KktReport kkt_residuals(const Scenario& s, const Allocation& a) {
  KktReport rep;
  const auto terms = derive_terms(s);
  const std::size_t n = terms.size();
  if (a.q_tilde.size() != n || a.b_relaxed_hz.size() != n) return rep;
  const double qt_lo = qt_lo_of(s);
  const double k = rounds_required(a.h_relaxed, a.eps_q_relaxed, s.coeffs);
  const double r_total = a.h_relaxed * k;

  double phi = phi_of(terms, s.coeffs, a.q_tilde);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = std::exp2(std::exp2(a.q_tilde[i]));
    const double mu2 = i < a.mu2.size() ? a.mu2[i] : 0.0;
    const double lhs = r_total * terms[i].time_c2_s * (terms[i].p_cp_w + mu2);
    const double pressure = kLn2 * a.mu1 * s.coeffs.a3 * terms[i].pi2 * s.coeffs.s_scale * x /
                            ((x - 1.0) * (x - 1.0));
    const double g = lhs - pressure;
    const double scale = std::max({lhs, pressure, 1e-30});
    const double cap = i < a.q_tilde_caps.size() ? a.q_tilde_caps[i] : qt_lo;
    double viol;
    if (a.q_tilde[i] <= qt_lo + 1e-9) viol = std::max(0.0, -g);
    else if (a.q_tilde[i] >= cap - 1e-9) viol = std::max(0.0, g);
    else viol = std::abs(g);
    rep.stationarity_q_max = std::max(rep.stationarity_q_max, viol / scale);

    const double t_cp = terms[i].time_c2_s * std::exp2(a.q_tilde[i]) + terms[i].time_c1_s;
    const double t_rem = s.t_max_s - r_total * t_cp;
    const double b_min = t_rem > 0 ? k * terms[i].alpha1 / t_rem
                                   : std::numeric_limits<double>::infinity();
    const double grad = -k * s.devices[i].radio.p_cm_w * terms[i].alpha1 /
                            (a.b_relaxed_hz[i] * a.b_relaxed_hz[i]) +
                        a.omega;
    const double bscale = std::max(a.omega, 1e-30);
    const double bviol = (a.b_relaxed_hz[i] <= b_min * (1.0 + 1e-9))
                             ? std::max(0.0, -grad)
                             : std::abs(grad);
    rep.stationarity_b_max = std::max(rep.stationarity_b_max, bviol / bscale);

    const double deadline_lhs = k * (terms[i].alpha1 / a.b_relaxed_hz[i] + a.h_relaxed * t_cp);
    rep.comp_slack_max =
        std::max(rep.comp_slack_max,
                 std::abs((i < a.mu2.size() ? a.mu2[i] : 0.0) * (deadline_lhs - s.t_max_s)) /
                     std::max(1.0, s.t_max_s));
  }
  rep.comp_slack_max = std::max(rep.comp_slack_max,
                                std::abs(a.mu1 * (phi - a.eps_q_relaxed)) /
                                    std::max(1.0, a.eps_q_relaxed));
  double bsum = std::accumulate(a.b_relaxed_hz.begin(), a.b_relaxed_hz.end(), 0.0);
  rep.comp_slack_max = std::max(rep.comp_slack_max, std::abs(a.omega * (bsum - s.net.b_max_hz)) /
                                                        std::max(1.0, s.net.b_max_hz));
  return rep;
}

}  // namespace fwq
