#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "fwq/flsim.hpp"
#include "fwq/harness.hpp"
#include "fwq/solver.hpp"

namespace fwq {

inline constexpr const char* kVersion = "0.1.0";

/// Scenario configs accept field units of either flavour (b_max_mhz or
/// b_max_hz, p_cm_dbm or p_cm_w, ...) and normalize to SI on load. Missing or
/// ill-typed fields raise ConfigError naming the full field path.
struct LoadedScenario {
  Scenario scenario;
  std::uint64_t seed = 1;
  std::string digest;  // FNV-1a of the raw config bytes
};

Scenario scenario_from_json(const nlohmann::json& j);
LoadedScenario load_scenario_file(const std::string& path);

SweepSpec sweep_spec_from_json(const nlohmann::json& j);
SweepSpec load_sweep_file(const std::string& path, std::string* digest = nullptr);

SimConfig sim_config_from_json(const nlohmann::json& j);
SimConfig load_sim_file(const std::string& path, std::string* digest = nullptr);

nlohmann::json coeffs_to_json(const ConvergenceCoeffs& c);
ConvergenceCoeffs coeffs_from_json(const nlohmann::json& j);

/// Full result record: inputs digest, allocation, slacks, multipliers and KKT
/// residuals; everything needed to re-verify the solution offline.
nlohmann::json solve_record(const Scenario& s, const SolveResult& r, const std::string& digest,
                            std::uint64_t seed);

nlohmann::json run_manifest(const std::string& digest, std::uint64_t seed,
                            const std::vector<std::string>& outputs);

}  // namespace fwq
