#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fwq/solver.hpp"

namespace fwq {

enum class Strategy { Fwq, UnifiedQ, RandQ, FullPrecision };

std::string to_string(Strategy s);

/// Knobs of the device generator that are not drawn from a distribution.
struct GenParams {
  double path_loss = 1e-3;          // mean linear channel gain
  double base_capacity_mb = 1800.0; // smallest capacity group
  double model_size_mb = 2400.0;
  GpuProfile base_gpu{2.0, 5e-10, 2e-10, 0.9, 1.1e9, 1.5e9,
                      0.1, 1e9, 2e9, 7.12e-3, 0.274, 4.24e-4, 1.035};
};

/// Draws n devices: transmit power uniform over {19..23} dBm, exponential
/// (Rayleigh-power) fading around the path loss, core/memory frequencies from
/// {1050..1200}/{1450..1600} MHz, and four contiguous capacity groups at
/// base + {0, 50, 150, 200} * heterogeneity_l MB. Device i's draws depend only
/// on (seed, i), so sweeps over n or heterogeneity reuse the same devices.
std::vector<DeviceProfile> gen_devices(int n, double heterogeneity_l, std::uint64_t seed,
                                       const GenParams& gen = {});

/// Runs one strategy on a scenario. The seed only feeds RandQ's bit-width
/// draws. UnifiedQ enumerates a shared bit-width; FullPrecision pins q = 32;
/// both re-optimize everything else through the same fixed-q path.
SolveResult run_strategy(Strategy strategy, const Scenario& s, std::uint64_t seed);

struct SweepSpec {
  enum class Kind { NumDevices, Heterogeneity, Bandwidth };
  Kind kind = Kind::Heterogeneity;
  std::vector<double> values;
  int repeats = 1;
  std::uint64_t seed = 1;
  int n_devices = 10;           // device count for non-NumDevices sweeps
  double heterogeneity_l = 0;   // L for non-Heterogeneity sweeps
  Scenario base;                // devices are regenerated per point
  GenParams gen;
};

struct SweepRow {
  double sweep_value = 0;
  std::uint64_t seed = 0;
  Strategy strategy = Strategy::Fwq;
  bool feasible = false;
  double objective_j = 0, h = 0, k_rounds = 0, eps_q = 0;
  std::vector<int> q;
  std::vector<double> b_hz;
};

struct SweepPointStats {
  double sweep_value = 0;
  Strategy strategy = Strategy::Fwq;
  double mean_objective_j = 0;
  double stddev_objective_j = 0;
  int n_feasible = 0;
  int n_total = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<SweepPointStats> stats;
};

/// Runs every strategy at every (value, repeat); points run in parallel (the
/// FWQ_THREADS environment variable caps the pool) and merge deterministically
/// in (value, seed, strategy) order. Infeasible runs stay in the rows with a
/// flag and are excluded from the means.
SweepResult sweep(const SweepSpec& spec);

/// Builds the scenario of one sweep point (exposed for tests and the CLI).
Scenario sweep_point_scenario(const SweepSpec& spec, double value, std::uint64_t rep_seed);

/// Channel-gain quartile of each device (0 = worst). Ties break by index.
std::vector<int> channel_quartiles(const Scenario& s);

/// Smallest assigned bit-width among the worst-channel quartile.
int min_q_in_worst_quartile(const Scenario& s, const Allocation& a);

}  // namespace fwq
