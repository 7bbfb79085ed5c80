#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fwq/config.hpp"
#include "fwq/errors.hpp"
#include "fwq/flsim.hpp"
#include "fwq/harness.hpp"
#include "fwq/io.hpp"
#include "fwq/solver.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitInfeasible = 2;

std::uint64_t effective_seed(const std::optional<std::uint64_t>& flag, std::uint64_t from_config) {
  return flag ? *flag : from_config;
}

fwq::Strategy parse_strategy(const std::string& name) {
  if (name == "fwq") return fwq::Strategy::Fwq;
  if (name == "unified") return fwq::Strategy::UnifiedQ;
  if (name == "rand") return fwq::Strategy::RandQ;
  if (name == "full") return fwq::Strategy::FullPrecision;
  throw fwq::ConfigError("unknown strategy: " + name + " (expected fwq|unified|rand|full)");
}

int cmd_solve(const std::string& config_path, const std::optional<std::uint64_t>& seed_flag,
              const std::string& out_path, const std::string& strategy_name) {
  fwq::LoadedScenario loaded = fwq::load_scenario_file(config_path);
  const std::uint64_t seed = effective_seed(seed_flag, loaded.seed);
  const fwq::Strategy strategy = parse_strategy(strategy_name);
  fwq::SolveResult result = fwq::run_strategy(strategy, loaded.scenario, seed);

  nlohmann::json record = fwq::solve_record(loaded.scenario, result, loaded.digest, seed);
  record["strategy"] = fwq::to_string(strategy);
  const std::string body = record.dump(2) + "\n";
  if (!out_path.empty()) {
    fwq::write_file_atomic(out_path, body);
    fwq::write_file_atomic(out_path + ".manifest.json",
                           fwq::run_manifest(loaded.digest, seed, {out_path}).dump(2) + "\n");
  } else {
    std::cout << body;
  }
  if (!result.feasible) {
    std::cerr << "infeasible: " << result.infeasible_reason << "\n";
    return kExitInfeasible;
  }
  std::cout << "objective_j=" << result.alloc.objective_j << " h=" << result.alloc.h
            << " k_rounds=" << result.alloc.k_rounds << "\n";
  return kExitOk;
}

int cmd_sweep(const std::string& spec_path, const std::optional<std::uint64_t>& seed_flag,
              const std::string& out_dir) {
  std::string digest;
  fwq::SweepSpec spec = fwq::load_sweep_file(spec_path, &digest);
  if (seed_flag) spec.seed = *seed_flag;
  fwq::SweepResult result = fwq::sweep(spec);

  std::filesystem::create_directories(out_dir);
  const std::string csv_path = out_dir + "/sweep.csv";
  fwq::write_file_atomic(csv_path, fwq::sweep_to_csv(result));

  nlohmann::json stats;
  for (const auto& st : result.stats)
    stats.push_back(nlohmann::json{{"sweep_value", st.sweep_value},
                                   {"strategy", fwq::to_string(st.strategy)},
                                   {"mean_objective_j", st.mean_objective_j},
                                   {"stddev_objective_j", st.stddev_objective_j},
                                   {"n_feasible", st.n_feasible},
                                   {"n_total", st.n_total}});
  const std::string stats_path = out_dir + "/summary.json";
  fwq::write_file_atomic(stats_path, stats.dump(2) + "\n");
  fwq::write_file_atomic(out_dir + "/manifest.json",
                         fwq::run_manifest(digest, spec.seed, {csv_path, stats_path}).dump(2) +
                             "\n");
  std::cout << "wrote " << csv_path << " (" << result.rows.size() << " rows)\n";
  return kExitOk;
}

int cmd_simulate(const std::string& config_path, const std::optional<std::uint64_t>& seed_flag,
                 const std::string& out_path) {
  std::string digest;
  fwq::SimConfig cfg = fwq::load_sim_file(config_path, &digest);
  if (seed_flag) cfg.seed = *seed_flag;
  fwq::TrainingTrace trace = fwq::run_fwq_fl(cfg);
  const std::string body = fwq::trace_to_csv(trace);
  if (!out_path.empty()) {
    fwq::write_file_atomic(out_path, body);
    fwq::write_file_atomic(out_path + ".manifest.json",
                           fwq::run_manifest(digest, cfg.seed, {out_path}).dump(2) + "\n");
    std::cout << "wrote " << out_path << " (" << trace.rounds() << " rounds)\n";
  } else {
    std::cout << body;
  }
  return kExitOk;
}

int cmd_fit(const std::string& traces_dir, const std::string& targets_csv,
            const std::string& out_path) {
  std::vector<fwq::TrainingTrace> traces;
  std::vector<std::string> names;
  for (const auto& entry : std::filesystem::directory_iterator(traces_dir))
    if (entry.path().extension() == ".csv") names.push_back(entry.path().string());
  std::sort(names.begin(), names.end());
  for (const auto& name : names) traces.push_back(fwq::trace_from_csv(fwq::read_file(name)));
  if (traces.empty()) throw fwq::InvalidInput("no .csv traces under " + traces_dir);

  std::vector<double> targets;
  if (!targets_csv.empty()) {
    std::istringstream in(targets_csv);
    std::string item;
    while (std::getline(in, item, ',')) targets.push_back(std::stod(item));
  } else {
    // Default: mid-range levels common to the traces.
    double lo = 1e300, hi = 0;
    for (const auto& t : traces) {
      for (double g : t.grad_norm_sq) lo = std::min(lo, g);
      if (!t.grad_norm_sq.empty()) hi = std::max(hi, t.grad_norm_sq.front());
    }
    for (double f : {0.8, 0.6, 0.45, 0.35, 0.25, 0.18, 0.12, 0.08, 0.05, 0.03})
      targets.push_back(lo + f * (hi - lo));
  }

  fwq::FitResult fit = fwq::fit_coeffs(traces, targets);
  nlohmann::json out;
  out["coeffs"] = fwq::coeffs_to_json(fit.coeffs);
  out["residual_norm"] = fit.residual_norm;
  out["r_squared"] = fit.r_squared;
  out["n_traces"] = traces.size();
  out["targets"] = targets;
  const std::string body = out.dump(2) + "\n";
  if (!out_path.empty()) {
    fwq::write_file_atomic(out_path, body);
    std::cout << "wrote " << out_path << " (r_squared=" << fit.r_squared << ")\n";
  } else {
    std::cout << body;
  }
  return kExitOk;
}

int cmd_verify(const std::string& config_path, const std::optional<std::uint64_t>& seed_flag,
               int grid_h, int grid_b) {
  fwq::LoadedScenario loaded = fwq::load_scenario_file(config_path);
  if (loaded.scenario.devices.size() > 4)
    throw fwq::ConfigError("verify is exhaustive; use a scenario with at most 4 devices");
  (void)effective_seed(seed_flag, loaded.seed);

  fwq::SolveResult it = fwq::iterate(loaded.scenario);
  fwq::BruteForceGrids grids;
  grids.h_max = grid_h;
  grids.b_steps = grid_b;
  fwq::SolveResult bf = fwq::brute_force(loaded.scenario, grids);

  if (!it.feasible || !bf.feasible) {
    std::cout << "iterate: " << (it.feasible ? "feasible" : "infeasible (" + it.infeasible_reason + ")")
              << "\nbrute_force: "
              << (bf.feasible ? "feasible" : "infeasible (" + bf.infeasible_reason + ")") << "\n";
    return (it.feasible == bf.feasible) ? kExitInfeasible : kExitError;
  }
  const double gap = it.alloc.objective_j / bf.alloc.objective_j - 1.0;
  std::cout << "iterate_objective_j=" << it.alloc.objective_j
            << " brute_force_objective_j=" << bf.alloc.objective_j << " gap=" << gap * 100.0
            << "%\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Energy-aware federated-learning co-design: quantization, bandwidth and "
               "local-update allocation"};
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed_flag;
  std::string config_path, out_path, out_dir, strategy = "fwq", targets;
  int grid_h = 64, grid_b = 24;

  auto* solve = app.add_subcommand("solve", "Optimize one scenario and write the allocation record");
  solve->add_option("--config", config_path, "scenario config (JSON)")->required();
  solve->add_option("--seed", seed_flag, "override the config seed");
  solve->add_option("--out", out_path, "output record path (stdout when omitted)");
  solve->add_option("--strategy", strategy, "fwq | unified | rand | full");

  auto* sweep = app.add_subcommand("sweep", "Run a sweep experiment over scenarios");
  sweep->add_option("--spec", config_path, "sweep spec (JSON)")->required();
  sweep->add_option("--seed", seed_flag, "override the spec seed");
  sweep->add_option("--out-dir", out_dir, "output directory")->required();

  auto* simulate = app.add_subcommand("simulate", "Run the quantized federated training simulator");
  simulate->add_option("--config", config_path, "simulation config (JSON)")->required();
  simulate->add_option("--seed", seed_flag, "override the config seed");
  simulate->add_option("--out", out_path, "trace CSV path (stdout when omitted)");

  auto* fit = app.add_subcommand("fit", "Fit bound coefficients from trace CSVs");
  fit->add_option("--traces", config_path, "directory of trace CSVs")->required();
  fit->add_option("--targets", targets, "comma-separated gradient-norm target levels");
  fit->add_option("--out", out_path, "coefficients JSON path (stdout when omitted)");

  auto* verify = app.add_subcommand("verify", "Compare the iterative solver against brute force");
  verify->add_option("--config", config_path, "scenario config (JSON)")->required();
  verify->add_option("--seed", seed_flag, "override the config seed");
  verify->add_option("--grid-h", grid_h, "largest local-update count searched");
  verify->add_option("--grid-b", grid_b, "bandwidth simplex resolution");

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed()) return cmd_solve(config_path, seed_flag, out_path, strategy);
    if (sweep->parsed()) return cmd_sweep(config_path, seed_flag, out_dir);
    if (simulate->parsed()) return cmd_simulate(config_path, seed_flag, out_path);
    if (fit->parsed()) return cmd_fit(config_path, targets, out_path);
    if (verify->parsed()) return cmd_verify(config_path, seed_flag, grid_h, grid_b);
  } catch (const fwq::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
