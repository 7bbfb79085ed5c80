#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fwq/convergence.hpp"
#include "fwq/models.hpp"

namespace fwq {

struct Scenario {
  std::vector<DeviceProfile> devices;
  NetworkConfig net;
  ConvergenceCoeffs coeffs;
  double t_max_s = 0;                  // training deadline
  std::vector<int> q_set = {8, 16, 32};
};

/// Throws ConfigError when the scenario violates its structural invariants
/// (weights not summing to 1, no memory-feasible bit-width, ...).
void validate(const Scenario& s);

struct DeviceEnergy {
  double comp_energy_j = 0;  // per round (h steps)
  double comm_energy_j = 0;  // per round
  double comp_time_s = 0;    // per step
  double comm_time_s = 0;    // per round
};

struct Allocation {
  int h = 1;
  double eps_q = 0;
  std::vector<int> q;        // per-device bit-width, from q_set
  std::vector<double> b_hz;  // per-device bandwidth
  double k_rounds = 0;       // real-valued round count
  long long k_rounds_ceil = 0;
  double objective_j = 0;
  std::vector<DeviceEnergy> per_device;

  // Relaxed iterate the rounding started from, with the multipliers needed to
  // re-verify the KKT system offline.
  double h_relaxed = 1;
  double eps_q_relaxed = 0;
  double k_relaxed = 0;
  double objective_relaxed_j = 0;
  std::vector<double> q_tilde;       // log2 bit-widths
  std::vector<double> q_tilde_caps;  // active upper bounds during the last q-solve
  std::vector<double> b_relaxed_hz;
  double mu1 = 0;            // quantization-error multiplier
  std::vector<double> mu2;   // per-device deadline multipliers
  double omega = 0;          // bandwidth multiplier (relaxed solve)
  double omega_round = 0;    // bandwidth multiplier after rounding
};

/// Signed slacks of every constraint (>= 0 means satisfied). Tolerances are
/// relative to each constraint's own scale.
struct ConstraintReport {
  std::vector<double> memory_slack_mb;     // C_i - c3(q_i) U_i
  double quant_error_slack = 0;            // eps_q - phi(q)
  double convergence_slack = 0;            // eps - [(a1 h + a2)/sqrt(M h K) + phi(q)]
  std::vector<double> deadline_slack_s;    // t_max - K (h T_cp,i + T_cm,i)
  double bandwidth_slack_hz = 0;           // b_max - sum b_i

  bool feasible(double rel_tol = 1e-6) const;
  std::string first_violation(double rel_tol = 1e-6) const;  // empty if feasible
  double scale_memory = 1, scale_eps = 1, scale_time = 1, scale_bandwidth = 1;
};

enum class BandwidthRule {
  KktSqrt,    // stationary point of the Lagrangian: b = sqrt(K p alpha1 / omega)
  PaperLinear // literal printed form, kept for comparison plots only
};

struct SolveOptions {
  int max_outer = 100;
  double rel_tol = 1e-6;
  BandwidthRule bw_rule = BandwidthRule::KktSqrt;
  std::optional<std::vector<int>> fixed_q;  // pin bit-widths (baseline strategies)
};

struct SolveResult {
  Allocation alloc;
  ConstraintReport report;
  bool feasible = false;
  bool converged = false;
  int outer_iters = 0;
  std::string infeasible_reason;
  std::vector<double> objective_history;  // relaxed objective per outer pass
};

/// Total energy K(h, eps_q) * sum_i [ p_cm alpha1/b_i + h p_cp (c2 q_i + c1) ].
double objective(const Scenario& s, const Allocation& a);
double relaxed_objective(const Scenario& s, double h, double eps_q,
                         std::span<const double> q_bits, std::span<const double> b_hz);

ConstraintReport check_feasible(const Scenario& s, const Allocation& a);

/// Smallest quantization-error level reachable with the given bit-widths;
/// equals quant_error_term for the same q.
double eps_q_min(std::span<const double> q_bits, const ConvergenceCoeffs& c,
                 std::span<const DeviceProfile> devices);

/// Per-device deadline window intersected over devices: the h interval on
/// which (a1 h + a2)^2 (T_cm,i/h + T_cp,i) <= M (eps - eps_q)^2 t_max for all
/// i, clipped to [1, h-cap]. Throws DeadlineInfeasible when empty.
std::pair<double, double> h_bounds(const Scenario& s, std::span<const double> q_bits,
                                   std::span<const double> b_hz, double eps_q);

inline constexpr double kHCap = 1e4;

/// Positive stationary point of
///   Psi(h) = (a1 h + a2)^2 (e_cm + h e_cp) / (M h (eps - eps_q)^2),
/// i.e. the positive root of h^3 + alpha h^2 + beta with
/// alpha = (a1 e_cm + 2 a2 e_cp)/(2 a1 e_cp), beta = -a2^2 e_cm/(2 a1^2 e_cp),
/// evaluated in closed form and polished to machine precision. e_cm = 0 makes
/// Psi increasing; 0 is returned so callers clip to the lower bound.
double cardano_h(double e_cm_j, double e_cp_j_per_step, const ConvergenceCoeffs& c);

/// eps_q = eps_q_min(q); h = clip(cardano stationary point, h_bounds).
std::pair<double, double> solve_h(const Scenario& s, std::span<const double> q_bits,
                                  std::span<const double> b_hz);

/// Unconstrained stationarity value of the log2 bit-width of one device:
/// solves R c2 (p_cp + mu2) = ln2 mu1 a3 pi^2 s x/(x-1)^2 with x = 2^(2^qt)
/// via the quadratic x^2 - (2+lambda)x + 1 = 0, root > 1. Returns -inf as
/// mu1 -> 0 (callers clip). Throws InvalidMultiplier when lambda <= 0.
double stationarity_qtilde(double mu1, double mu2_i, const DeviceProfile& d,
                           const ConvergenceCoeffs& c, double r_total);

struct QSolve {
  std::vector<double> q_tilde;
  std::vector<double> caps;  // effective upper bounds (memory and deadline)
  double mu1 = 0;
  std::vector<double> mu2;
};

/// Bisection on the quantization-error multiplier until
/// phi(q_tilde) = sum a3 pi^2 s/(2^(2^qt)-1) meets eps_q; per-device deadline
/// caps from the previous bandwidth enter as upper bounds with multipliers
/// recovered by complementary slackness.
QSolve solve_q_given_b(const Scenario& s, double h, double eps_q,
                       std::span<const double> b_prev_hz);

struct BSolve {
  std::vector<double> b_hz;
  std::vector<double> b_min_hz;
  double omega = 0;
};

/// Water-filling with deadline floors: b_i = max(b_min_i, b_i(omega)) with
/// omega bisected until the bandwidth budget is met exactly.
BSolve solve_b_given_q(const Scenario& s, double h, double eps_q,
                       std::span<const double> q_tilde,
                       BandwidthRule rule = BandwidthRule::KktSqrt);

/// Alternating minimization over (h, eps_q) and (q, b), then rounding to an
/// integer h and power-of-two bit-widths projected into q_set, with one
/// bandwidth re-solve for the rounded point. Never throws on infeasibility;
/// the result carries the first violated constraint instead.
SolveResult iterate(const Scenario& s, const SolveOptions& opt = {});

struct BruteForceGrids {
  int h_min = 1;
  int h_max = 64;
  int b_steps = 24;  // simplex resolution for the bandwidth grid
};

/// Exhaustive verification oracle over integer h, q_set^N and a bandwidth
/// simplex grid (sharpened with the closed-form bandwidth candidate). Intended
/// for N <= 4.
SolveResult brute_force(const Scenario& s, const BruteForceGrids& g = {});

struct KktReport {
  double stationarity_q_max = 0;  // worst projected residual, relative
  double stationarity_b_max = 0;
  double comp_slack_max = 0;      // worst complementary-slackness product
};

/// Recomputes the KKT residuals of the relaxed iterate stored in an
/// allocation; used by the result records so solutions can be re-verified
/// offline.
KktReport kkt_residuals(const Scenario& s, const Allocation& a);

}  // namespace fwq
