#pragma once

#include <span>
#include <vector>

#include "fwq/models.hpp"
#include "fwq/quantizer.hpp"
#include "fwq/trace.hpp"

namespace fwq {

/// Fitted coefficients of the round-count bound. a1 multiplies the local
/// update period, a2 is the constant, a3 weighs the quantization-error term;
/// eps is the target average-squared gradient norm, m_batch the mini-batch
/// size, and s_scale the weight-magnitude constant in delta = s/(2^q - 1).
struct ConvergenceCoeffs {
  double a1 = 1;
  double a2 = 1;
  double a3 = 1;
  double eps = 0.1;
  double m_batch = 1;
  double s_scale = 1;
};

/// Raw-bound constants; only bound_value consumes these. Everywhere else they
/// are absorbed into the fitted coefficients.
struct TheoryParams {
  double lipschitz_l = 1;
  double grad_second_moment_g = 1;
  double f_initial = 1;  // F at the initial point
  double f_star = 0;     // global minimum of F
  double dim_d = 1;
  std::vector<double> variances;  // per-device stochastic-gradient std tau_i
};

/// Average-squared-gradient bound after r_iters total iterations with h local
/// steps per round: 4(F0-F*)/sqrt(M R) + 6 h L tau / sqrt(M R) + error floor
/// sqrt(d) L G sum pi_i^2 delta_i, with tau = sum pi_i^2 tau_i^2 and
/// delta_i = s_scale/(2^q_i - 1).
double bound_value(double r_iters, double h, const TheoryParams& theory, double m_batch,
                   std::span<const DeviceProfile> devices, std::span<const QuantScheme> schemes,
                   double s_scale = 1.0);

/// Communication rounds needed to reach eps given quantization-error level
/// eps_q: (a1 h + a2)^2 / (m_batch * h * (eps - eps_q)^2). Real-valued; callers
/// ceil when they need an integer count. Throws Infeasible when eps_q >= eps.
double rounds_required(double h, double eps_q, const ConvergenceCoeffs& c);

/// a3 * sum pi_i^2 * s/(2^q_i - 1). The continuous overload accepts fractional
/// bit-widths (relaxation).
double quant_error_term(std::span<const DeviceProfile> devices,
                        std::span<const QuantScheme> schemes, const ConvergenceCoeffs& c);
double quant_error_term(std::span<const DeviceProfile> devices, std::span<const double> q_bits,
                        const ConvergenceCoeffs& c);

struct FitResult {
  ConvergenceCoeffs coeffs;
  double residual_norm = 0;
  double r_squared = 0;
};

/// Non-negative least-squares fit of (a1 h + a2)/sqrt(M h K) + a3 sum pi^2 delta
/// against the gradient-norm levels of the given traces. For each trace and
/// each target level, K is the first round at which the trace drops to the
/// target and the regression point is the level actually measured there.
/// Requires at least three traces spanning at least two distinct
/// (h, q-profile) settings; throws UnderdeterminedFit otherwise.
FitResult fit_coeffs(std::span<const TrainingTrace> traces, std::span<const double> targets);

}  // namespace fwq
