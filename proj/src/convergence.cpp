#include "fwq/convergence.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <utility>

#include "fwq/errors.hpp"

namespace fwq {

double bound_value(double r_iters, double h, const TheoryParams& theory, double m_batch,
                   std::span<const DeviceProfile> devices, std::span<const QuantScheme> schemes,
                   double s_scale) {
  if (r_iters < 1 || h < 1) throw InvalidInput("r_iters and h must be >= 1");
  if (devices.size() != schemes.size()) throw DimensionMismatch("devices vs schemes");
  const double sqrt_mr = std::sqrt(m_batch * r_iters);
  double tau = 0.0;
  for (std::size_t i = 0; i < devices.size(); ++i) {
    const double pi = devices[i].pi_weight;
    const double ti = i < theory.variances.size() ? theory.variances[i] : 0.0;
    tau += pi * pi * ti * ti;
  }
  double floor_term = 0.0;
  for (std::size_t i = 0; i < devices.size(); ++i) {
    const double pi = devices[i].pi_weight;
    floor_term += pi * pi * s_scale * schemes[i].paper_resolution;
  }
  return 4.0 * (theory.f_initial - theory.f_star) / sqrt_mr +
         6.0 * h * theory.lipschitz_l * tau / sqrt_mr +
         std::sqrt(theory.dim_d) * theory.lipschitz_l * theory.grad_second_moment_g * floor_term;
}

double rounds_required(double h, double eps_q, const ConvergenceCoeffs& c) {
  if (!(h >= 1.0)) throw InvalidInput("h must be >= 1");
  if (eps_q < 0.0) throw InvalidInput("eps_q must be >= 0");
  if (eps_q >= c.eps) throw Infeasible("eps_q >= eps: required round count diverges");
  const double num = c.a1 * h + c.a2;
  const double gap = c.eps - eps_q;
  return num * num / (c.m_batch * h * gap * gap);
}

double quant_error_term(std::span<const DeviceProfile> devices,
                        std::span<const QuantScheme> schemes, const ConvergenceCoeffs& c) {
  if (devices.size() != schemes.size()) throw DimensionMismatch("devices vs schemes");
  double sum = 0.0;
  for (std::size_t i = 0; i < devices.size(); ++i) {
    const double pi = devices[i].pi_weight;
    sum += pi * pi * c.s_scale * schemes[i].paper_resolution;
  }
  return c.a3 * sum;
}

double quant_error_term(std::span<const DeviceProfile> devices, std::span<const double> q_bits,
                        const ConvergenceCoeffs& c) {
  if (devices.size() != q_bits.size()) throw DimensionMismatch("devices vs q_bits");
  double sum = 0.0;
  for (std::size_t i = 0; i < devices.size(); ++i) {
    const double pi = devices[i].pi_weight;
    sum += pi * pi * c.s_scale / (std::exp2(q_bits[i]) - 1.0);
  }
  return c.a3 * sum;
}

namespace {

struct FitRow {
  double u, v, w;  // regressors for a1, a2, a3
  double y;
};

// Least squares restricted to a subset of the three coefficients, via normal
// equations solved with Gaussian elimination. Returns {coeffs, sse} or sse<0
// if singular.
std::pair<std::array<double, 3>, double> subset_lsq(const std::vector<FitRow>& rows,
                                                    const std::array<bool, 3>& active) {
  int idx[3], k = 0;
  for (int j = 0; j < 3; ++j)
    if (active[j]) idx[k++] = j;
  std::array<double, 3> coef{0, 0, 0};
  if (k > 0) {
    double ata[3][3] = {};
    double atb[3] = {};
    for (const auto& r : rows) {
      const double x[3] = {r.u, r.v, r.w};
      for (int a = 0; a < k; ++a) {
        atb[a] += x[idx[a]] * r.y;
        for (int b = 0; b < k; ++b) ata[a][b] += x[idx[a]] * x[idx[b]];
      }
    }
    // Gaussian elimination with partial pivoting on the k x k system.
    for (int col = 0; col < k; ++col) {
      int piv = col;
      for (int r2 = col + 1; r2 < k; ++r2)
        if (std::abs(ata[r2][col]) > std::abs(ata[piv][col])) piv = r2;
      if (std::abs(ata[piv][col]) < 1e-300) return {coef, -1.0};
      std::swap(ata[col], ata[piv]);
      std::swap(atb[col], atb[piv]);
      for (int r2 = 0; r2 < k; ++r2) {
        if (r2 == col) continue;
        const double f = ata[r2][col] / ata[col][col];
        for (int c2 = col; c2 < k; ++c2) ata[r2][c2] -= f * ata[col][c2];
        atb[r2] -= f * atb[col];
      }
    }
    for (int a = 0; a < k; ++a) coef[idx[a]] = atb[a] / ata[a][a];
  }
  double sse = 0.0;
  for (const auto& r : rows) {
    const double pred = coef[0] * r.u + coef[1] * r.v + coef[2] * r.w;
    sse += (r.y - pred) * (r.y - pred);
  }
  return {coef, sse};
}

}  // namespace

FitResult fit_coeffs(std::span<const TrainingTrace> traces, std::span<const double> targets) {
  if (traces.size() < 3) throw UnderdeterminedFit("need at least 3 traces");
  if (targets.empty()) throw InvalidInput("need at least one target level");

  std::set<std::pair<double, std::vector<int>>> settings;
  for (const auto& t : traces) settings.insert({t.h_steps, t.q_bits});
  if (settings.size() < 2) throw UnderdeterminedFit("all traces share one (h, q) setting");

  std::vector<FitRow> rows;
  for (const auto& t : traces) {
    double phi = 0.0;
    for (std::size_t i = 0; i < t.q_bits.size(); ++i) {
      const double pi = i < t.pi.size() ? t.pi[i] : 0.0;
      if (t.q_bits[i] > 0) phi += pi * pi * t.weight_scale / (std::exp2(t.q_bits[i]) - 1.0);
    }
    for (double target : targets) {
      // K = first round at or below the target; skip targets the trace never reaches.
      std::size_t k = 0;
      while (k < t.rounds() && t.grad_norm_sq[k] > target) ++k;
      if (k >= t.rounds()) continue;
      FitRow r;
      const double rounds = static_cast<double>(k + 1);
      r.u = std::sqrt(t.h_steps / (t.m_batch * rounds));
      r.v = 1.0 / std::sqrt(t.m_batch * t.h_steps * rounds);
      r.w = phi;
      r.y = t.grad_norm_sq[k];
      rows.push_back(r);
    }
  }
  if (rows.size() < 3) throw UnderdeterminedFit("fewer than 3 usable (trace, target) points");

  // Full design must have rank 3 for the coefficients to be identifiable.
  {
    auto [coef, sse] = subset_lsq(rows, {true, true, true});
    (void)coef;
    double g00 = 0, g01 = 0, g02 = 0, g11 = 0, g12 = 0, g22 = 0;
    for (const auto& r : rows) {
      g00 += r.u * r.u; g01 += r.u * r.v; g02 += r.u * r.w;
      g11 += r.v * r.v; g12 += r.v * r.w; g22 += r.w * r.w;
    }
    const double det = g00 * (g11 * g22 - g12 * g12) - g01 * (g01 * g22 - g12 * g02) +
                       g02 * (g01 * g12 - g11 * g02);
    const double scale = std::max({g00, g11, g22, 1e-300});
    if (sse < 0.0 || std::abs(det) <= 1e-12 * scale * scale * scale)
      throw UnderdeterminedFit("degenerate design matrix");
  }

  // Non-negative LSQ over three coefficients: try every active subset and keep
  // the best feasible one.
  double best_sse = -1.0;
  std::array<double, 3> best{0, 0, 0};
  for (int mask = 0; mask < 8; ++mask) {
    std::array<bool, 3> active = {(mask & 1) != 0, (mask & 2) != 0, (mask & 4) != 0};
    auto [coef, sse] = subset_lsq(rows, active);
    if (sse < 0.0) continue;
    if (coef[0] < 0 || coef[1] < 0 || coef[2] < 0) continue;
    if (best_sse < 0.0 || sse < best_sse) {
      best_sse = sse;
      best = coef;
    }
  }
  if (best_sse < 0.0) throw UnderdeterminedFit("no feasible non-negative fit");

  double mean_y = 0.0;
  for (const auto& r : rows) mean_y += r.y;
  mean_y /= static_cast<double>(rows.size());
  double sst = 0.0;
  for (const auto& r : rows) sst += (r.y - mean_y) * (r.y - mean_y);

  FitResult out;
  out.coeffs.a1 = best[0];
  out.coeffs.a2 = best[1];
  out.coeffs.a3 = best[2];
  out.coeffs.eps = *std::min_element(targets.begin(), targets.end());
  out.coeffs.m_batch = traces.front().m_batch;
  double s_mean = 0.0;
  for (const auto& t : traces) s_mean += t.weight_scale;
  out.coeffs.s_scale = s_mean / static_cast<double>(traces.size());
  out.residual_norm = std::sqrt(best_sse);
  out.r_squared = sst > 0.0 ? 1.0 - best_sse / sst : 1.0;
  return out;
}

}  // namespace fwq
