#include "fwq/config.hpp"

#include <chrono>
#include <cmath>

#include "fwq/errors.hpp"
#include "fwq/io.hpp"

namespace fwq {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError(path + ": " + what);
}

const json& member(const json& j, const std::string& path, const std::string& key) {
  if (!j.is_object()) fail(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) fail(path + "." + key, "missing field");
  return *it;
}

double num(const json& j, const std::string& path, const std::string& key) {
  const json& v = member(j, path, key);
  if (!v.is_number()) fail(path + "." + key, "expected a number");
  return v.get<double>();
}

double num_or(const json& j, const std::string& key, double fallback) {
  auto it = j.find(key);
  return (it != j.end() && it->is_number()) ? it->get<double>() : fallback;
}

bool has(const json& j, const std::string& key) { return j.is_object() && j.contains(key); }

// One quantity configurable in two units; exactly one spelling may appear.
double pick_unit(const json& j, const std::string& path, const std::string& si_key,
                 const std::string& alt_key, double alt_factor, bool alt_is_dbm = false) {
  const bool s = has(j, si_key), a = has(j, alt_key);
  if (s && a) fail(path, "give either " + si_key + " or " + alt_key + ", not both");
  if (!s && !a) fail(path + "." + si_key, "missing field (or " + alt_key + ")");
  if (s) return num(j, path, si_key);
  const double v = num(j, path, alt_key);
  return alt_is_dbm ? dbm_to_watts(v) : v * alt_factor;
}

GpuProfile gpu_from_json(const json& j, const std::string& path) {
  GpuProfile g;
  g.p_g0_w = num(j, path, "p_g0_w");
  g.zeta_mem_w_per_hz = num(j, path, "zeta_mem_w_per_hz");
  g.zeta_core_w_per_v2hz = num(j, path, "zeta_core_w_per_v2hz");
  g.v_core_v = num(j, path, "v_core_v");
  g.f_core_hz = pick_unit(j, path, "f_core_hz", "f_core_mhz", 1e6);
  g.f_mem_hz = pick_unit(j, path, "f_mem_hz", "f_mem_mhz", 1e6);
  g.t0_s = num_or(j, "t0_s", 0.0);
  g.theta_mem_cycles = num(j, path, "theta_mem_cycles");
  g.theta_core_cycles = num(j, path, "theta_core_cycles");
  g.c1_slope = num(j, path, "c1_slope");
  g.c1_intercept = num(j, path, "c1_intercept");
  g.c2_slope = num(j, path, "c2_slope");
  g.c2_intercept = num(j, path, "c2_intercept");
  return g;
}

DeviceProfile device_from_json(const json& j, const std::string& path) {
  DeviceProfile d;
  d.id = has(j, "id") ? member(j, path, "id").get<std::string>() : "";
  d.pi_weight = num(j, path, "pi_weight");
  d.mem_capacity_mb = num(j, path, "mem_capacity_mb");
  d.model_size_mb = num(j, path, "model_size_mb");
  d.gpu = gpu_from_json(member(j, path, "gpu"), path + ".gpu");
  const json& radio = member(j, path, "radio");
  d.radio.p_cm_w = pick_unit(radio, path + ".radio", "p_cm_w", "p_cm_dbm", 0, true);
  d.radio.channel_gain = num(radio, path + ".radio", "channel_gain");
  return d;
}

NetworkConfig network_from_json(const json& j, const std::string& path) {
  NetworkConfig n;
  n.b_max_hz = pick_unit(j, path, "b_max_hz", "b_max_mhz", 1e6);
  n.noise_w = pick_unit(j, path, "noise_w", "noise_dbm", 0, true);
  n.payload_bits = pick_unit(j, path, "payload_bits", "payload_mbits", 1e6);
  if (has(j, "log2_rate")) n.log2_rate = member(j, path, "log2_rate").get<bool>();
  return n;
}

}  // namespace

ConvergenceCoeffs coeffs_from_json(const json& j) {
  const std::string path = "coeffs";
  ConvergenceCoeffs c;
  c.a1 = num(j, path, "a1");
  c.a2 = num(j, path, "a2");
  c.a3 = num(j, path, "a3");
  c.eps = num(j, path, "eps");
  c.m_batch = num(j, path, "m_batch");
  c.s_scale = num(j, path, "s_scale");
  return c;
}

json coeffs_to_json(const ConvergenceCoeffs& c) {
  return json{{"a1", c.a1},   {"a2", c.a2},           {"a3", c.a3},
              {"eps", c.eps}, {"m_batch", c.m_batch}, {"s_scale", c.s_scale}};
}

Scenario scenario_from_json(const json& j) {
  Scenario s;
  s.coeffs = coeffs_from_json(member(j, "", "coeffs"));
  s.net = network_from_json(member(j, "", "network"), "network");
  s.t_max_s = num(j, "", "t_max_s");
  if (has(j, "q_set")) {
    s.q_set.clear();
    for (const auto& q : member(j, "", "q_set")) s.q_set.push_back(q.get<int>());
  }
  if (has(j, "devices")) {
    const json& devs = member(j, "", "devices");
    if (!devs.is_array() || devs.empty()) fail("devices", "expected a non-empty array");
    for (std::size_t i = 0; i < devs.size(); ++i)
      s.devices.push_back(device_from_json(devs[i], "devices[" + std::to_string(i) + "]"));
  } else if (has(j, "generator")) {
    const json& g = member(j, "", "generator");
    GenParams gp;
    gp.path_loss = num_or(g, "path_loss", gp.path_loss);
    gp.base_capacity_mb = num_or(g, "base_capacity_mb", gp.base_capacity_mb);
    gp.model_size_mb = num_or(g, "model_size_mb", gp.model_size_mb);
    if (has(g, "base_gpu")) gp.base_gpu = gpu_from_json(member(g, "generator", "base_gpu"),
                                                        "generator.base_gpu");
    const int n = static_cast<int>(num(g, "generator", "n"));
    const double l = num_or(g, "heterogeneity_l", 0.0);
    const std::uint64_t seed = static_cast<std::uint64_t>(num_or(j, "seed", 1.0));
    s.devices = gen_devices(n, l, seed, gp);
  } else {
    fail("devices", "missing field (give devices or generator)");
  }
  validate(s);
  return s;
}

LoadedScenario load_scenario_file(const std::string& path) {
  const std::string bytes = read_file(path);
  json j;
  try {
    j = json::parse(bytes);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  LoadedScenario out;
  out.digest = fnv1a_hex(bytes);
  out.seed = static_cast<std::uint64_t>(num_or(j, "seed", 1.0));
  out.scenario = scenario_from_json(j);
  return out;
}

SweepSpec sweep_spec_from_json(const json& j) {
  SweepSpec spec;
  const std::string kind = member(j, "", "kind").get<std::string>();
  if (kind == "num_devices") spec.kind = SweepSpec::Kind::NumDevices;
  else if (kind == "heterogeneity") spec.kind = SweepSpec::Kind::Heterogeneity;
  else if (kind == "bandwidth") spec.kind = SweepSpec::Kind::Bandwidth;
  else fail("kind", "expected num_devices | heterogeneity | bandwidth");
  for (const auto& v : member(j, "", "values")) spec.values.push_back(v.get<double>());
  spec.repeats = static_cast<int>(num_or(j, "repeats", 1.0));
  spec.seed = static_cast<std::uint64_t>(num_or(j, "seed", 1.0));
  spec.n_devices = static_cast<int>(num_or(j, "n_devices", 10.0));
  spec.heterogeneity_l = num_or(j, "heterogeneity_l", 0.0);

  const json& base = member(j, "", "base");
  spec.base.coeffs = coeffs_from_json(member(base, "base", "coeffs"));
  spec.base.net = network_from_json(member(base, "base", "network"), "base.network");
  spec.base.t_max_s = num(base, "base", "t_max_s");
  if (has(base, "q_set")) {
    spec.base.q_set.clear();
    for (const auto& q : member(base, "base", "q_set")) spec.base.q_set.push_back(q.get<int>());
  }
  if (has(base, "generator")) {
    const json& g = member(base, "base", "generator");
    spec.gen.path_loss = num_or(g, "path_loss", spec.gen.path_loss);
    spec.gen.base_capacity_mb = num_or(g, "base_capacity_mb", spec.gen.base_capacity_mb);
    spec.gen.model_size_mb = num_or(g, "model_size_mb", spec.gen.model_size_mb);
    if (has(g, "base_gpu"))
      spec.gen.base_gpu = gpu_from_json(member(g, "base.generator", "base_gpu"),
                                        "base.generator.base_gpu");
  }
  return spec;
}

SweepSpec load_sweep_file(const std::string& path, std::string* digest) {
  const std::string bytes = read_file(path);
  if (digest) *digest = fnv1a_hex(bytes);
  json j;
  try {
    j = json::parse(bytes);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return sweep_spec_from_json(j);
}

SimConfig sim_config_from_json(const json& j) {
  SimConfig c;
  c.n_devices = static_cast<int>(num(j, "", "n_devices"));
  c.h_steps = static_cast<int>(num(j, "", "h_steps"));
  c.rounds = static_cast<int>(num(j, "", "rounds"));
  c.batch = static_cast<int>(num(j, "", "batch"));
  c.lr = num(j, "", "lr");
  c.seed = static_cast<std::uint64_t>(num_or(j, "seed", 1.0));
  c.label_skew = static_cast<int>(num_or(j, "label_skew", 0.0));
  if (has(j, "q_per_device")) {
    const json& q = member(j, "", "q_per_device");
    if (q.is_array())
      for (const auto& v : q) c.q_per_device.push_back(v.get<int>());
    else
      c.q_per_device.assign(c.n_devices, q.get<int>());
  }
  if (has(j, "model")) {
    const json& m = member(j, "", "model");
    const std::string kind = member(m, "model", "kind").get<std::string>();
    if (kind == "logistic") c.model_kind = TinyModel::Kind::Logistic;
    else if (kind == "mlp") c.model_kind = TinyModel::Kind::Mlp;
    else fail("model.kind", "expected logistic | mlp");
    c.hidden = static_cast<int>(num_or(m, "hidden", 16.0));
  }
  if (has(j, "data")) {
    const json& d = member(j, "", "data");
    const std::string kind = member(d, "data", "kind").get<std::string>();
    if (kind == "synthetic") {
      c.data.kind = DatasetSpec::Kind::Synthetic;
      c.data.synth.n_train = static_cast<int>(num_or(d, "n_train", c.data.synth.n_train));
      c.data.synth.n_test = static_cast<int>(num_or(d, "n_test", c.data.synth.n_test));
      c.data.synth.n_features = static_cast<int>(num_or(d, "n_features", c.data.synth.n_features));
      c.data.synth.n_classes = static_cast<int>(num_or(d, "n_classes", c.data.synth.n_classes));
      c.data.synth.class_sep = num_or(d, "class_sep", c.data.synth.class_sep);
      c.data.synth.noise = num_or(d, "noise", c.data.synth.noise);
    } else if (kind == "idx") {
      c.data.kind = DatasetSpec::Kind::Idx;
      c.data.images_path = member(d, "data", "images").get<std::string>();
      c.data.labels_path = member(d, "data", "labels").get<std::string>();
      if (has(d, "test_images")) c.data.test_images_path = d["test_images"].get<std::string>();
      if (has(d, "test_labels")) c.data.test_labels_path = d["test_labels"].get<std::string>();
    } else {
      fail("data.kind", "expected synthetic | idx");
    }
  }
  if (has(j, "ref_bandwidth_mhz")) c.ref_bandwidth_hz = num(j, "", "ref_bandwidth_mhz") * 1e6;
  if (has(j, "energy")) {
    const json& e = member(j, "", "energy");
    if (has(e, "gpu")) c.energy_gpu = gpu_from_json(member(e, "energy", "gpu"), "energy.gpu");
    if (has(e, "radio")) {
      const json& r = member(e, "energy", "radio");
      c.energy_radio.p_cm_w = pick_unit(r, "energy.radio", "p_cm_w", "p_cm_dbm", 0, true);
      c.energy_radio.channel_gain = num(r, "energy.radio", "channel_gain");
    }
    if (has(e, "network")) c.energy_net = network_from_json(member(e, "energy", "network"),
                                                            "energy.network");
  }
  return c;
}

SimConfig load_sim_file(const std::string& path, std::string* digest) {
  const std::string bytes = read_file(path);
  if (digest) *digest = fnv1a_hex(bytes);
  json j;
  try {
    j = json::parse(bytes);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return sim_config_from_json(j);
}

json solve_record(const Scenario& s, const SolveResult& r, const std::string& digest,
                  std::uint64_t seed) {
  json out;
  out["version"] = kVersion;
  out["config_digest"] = digest;
  out["seed"] = seed;
  out["feasible"] = r.feasible;
  out["converged"] = r.converged;
  out["outer_iterations"] = r.outer_iters;
  if (!r.infeasible_reason.empty()) out["infeasible_reason"] = r.infeasible_reason;
  out["objective_history"] = r.objective_history;
  if (!r.feasible) return out;

  const Allocation& a = r.alloc;
  json alloc;
  alloc["h"] = a.h;
  alloc["eps_q"] = a.eps_q;
  alloc["q"] = a.q;
  alloc["b_hz"] = a.b_hz;
  alloc["k_rounds"] = a.k_rounds;
  alloc["k_rounds_ceil"] = a.k_rounds_ceil;
  alloc["objective_j"] = a.objective_j;
  json per;
  for (const auto& d : a.per_device)
    per.push_back(json{{"comp_energy_j", d.comp_energy_j},
                       {"comm_energy_j", d.comm_energy_j},
                       {"comp_time_s", d.comp_time_s},
                       {"comm_time_s", d.comm_time_s}});
  alloc["per_device"] = per;
  json relaxed;
  relaxed["h"] = a.h_relaxed;
  relaxed["eps_q"] = a.eps_q_relaxed;
  relaxed["k_rounds"] = a.k_relaxed;
  relaxed["objective_j"] = a.objective_relaxed_j;
  relaxed["q_tilde"] = a.q_tilde;
  relaxed["q_tilde_caps"] = a.q_tilde_caps;
  relaxed["b_hz"] = a.b_relaxed_hz;
  relaxed["mu1"] = a.mu1;
  relaxed["mu2"] = a.mu2;
  relaxed["omega"] = a.omega;
  relaxed["omega_round"] = a.omega_round;
  alloc["relaxed"] = relaxed;
  out["allocation"] = alloc;

  json slacks;
  slacks["memory_mb"] = r.report.memory_slack_mb;
  slacks["quant_error"] = r.report.quant_error_slack;
  slacks["convergence"] = r.report.convergence_slack;
  slacks["deadline_s"] = r.report.deadline_slack_s;
  slacks["bandwidth_hz"] = r.report.bandwidth_slack_hz;
  out["slacks"] = slacks;

  const KktReport kkt = kkt_residuals(s, a);
  out["kkt"] = json{{"stationarity_q_max", kkt.stationarity_q_max},
                    {"stationarity_b_max", kkt.stationarity_b_max},
                    {"comp_slack_max", kkt.comp_slack_max}};
  return out;
}

json run_manifest(const std::string& digest, std::uint64_t seed,
                  const std::vector<std::string>& outputs) {
  const auto now = std::chrono::system_clock::now();
  json m;
  m["config_digest"] = digest;
  m["seed"] = seed;
  m["version"] = kVersion;
  m["timestamp_unix_ms"] =
      std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count();
  m["outputs"] = outputs;
  return m;
}

}  // namespace fwq
