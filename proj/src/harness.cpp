#include "fwq/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <thread>

#include "fwq/errors.hpp"
#include "fwq/rng.hpp"

namespace fwq {

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::Fwq: return "fwq";
    case Strategy::UnifiedQ: return "unified_q";
    case Strategy::RandQ: return "rand_q";
    case Strategy::FullPrecision: return "full_precision";
  }
  return "unknown";
}

std::vector<DeviceProfile> gen_devices(int n, double heterogeneity_l, std::uint64_t seed,
                                       const GenParams& gen) {
  if (n < 1) throw InvalidInput("need at least one device");
  const std::vector<double> tx_dbm = {19, 20, 21, 22, 23};
  const std::vector<double> core_mhz = {1050, 1100, 1150, 1200};
  const std::vector<double> mem_mhz = {1450, 1500, 1550, 1600};
  const double group_step[4] = {0, 50, 150, 200};

  Rng root = Rng(seed).stream("devices");
  std::vector<DeviceProfile> out(n);
  for (int i = 0; i < n; ++i) {
    Rng r = root.stream("device/" + std::to_string(i));
    DeviceProfile& d = out[i];
    d.id = "dev" + std::to_string(i);
    d.pi_weight = 1.0 / n;
    d.gpu = gen.base_gpu;
    d.gpu.f_core_hz = r.pick(core_mhz) * 1e6;
    d.gpu.f_mem_hz = r.pick(mem_mhz) * 1e6;
    d.radio.p_cm_w = dbm_to_watts(r.pick(tx_dbm));
    d.radio.channel_gain = gen.path_loss * r.exponential(1.0);
    const int group = static_cast<int>((static_cast<long long>(i) * 4) / n);
    d.mem_capacity_mb = gen.base_capacity_mb + group_step[group] * heterogeneity_l;
    d.model_size_mb = gen.model_size_mb;
  }
  return out;
}

SolveResult run_strategy(Strategy strategy, const Scenario& s, std::uint64_t seed) {
  const int n = static_cast<int>(s.devices.size());
  switch (strategy) {
    case Strategy::Fwq:
      return iterate(s);
    case Strategy::UnifiedQ: {
      SolveResult best;
      best.infeasible_reason = "no shared bit-width is feasible for every device";
      for (int q : s.q_set) {
        bool ok = true;
        for (const auto& d : s.devices) ok = ok && memory_feasible(d, q);
        if (!ok) continue;
        SolveOptions opt;
        opt.fixed_q = std::vector<int>(n, q);
        SolveResult r = iterate(s, opt);
        if (r.feasible && (!best.feasible || r.alloc.objective_j < best.alloc.objective_j))
          best = std::move(r);
        else if (!best.feasible && !r.feasible)
          best.infeasible_reason = r.infeasible_reason;
      }
      return best;
    }
    case Strategy::RandQ: {
      Rng rng = Rng(seed).stream("rand-q");
      std::vector<int> q(n);
      for (int i = 0; i < n; ++i) {
        std::vector<int> feas;
        for (int qc : s.q_set)
          if (memory_feasible(s.devices[i], qc)) feas.push_back(qc);
        if (feas.empty()) {
          SolveResult r;
          r.infeasible_reason = "memory";
          return r;
        }
        q[i] = feas[rng.pick_index(feas.size())];
      }
      SolveOptions opt;
      opt.fixed_q = std::move(q);
      return iterate(s, opt);
    }
    case Strategy::FullPrecision: {
      SolveOptions opt;
      opt.fixed_q = std::vector<int>(n, 32);
      return iterate(s, opt);
    }
  }
  return {};
}

Scenario sweep_point_scenario(const SweepSpec& spec, double value, std::uint64_t rep_seed) {
  Scenario s = spec.base;
  int n = spec.n_devices;
  double l = spec.heterogeneity_l;
  switch (spec.kind) {
    case SweepSpec::Kind::NumDevices: n = static_cast<int>(value); break;
    case SweepSpec::Kind::Heterogeneity: l = value; break;
    case SweepSpec::Kind::Bandwidth: s.net.b_max_hz = value; break;
  }
  s.devices = gen_devices(n, l, rep_seed, spec.gen);
  return s;
}

namespace {

unsigned pool_size() {
  if (const char* env = std::getenv("FWQ_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

constexpr Strategy kAll[] = {Strategy::Fwq, Strategy::UnifiedQ, Strategy::RandQ,
                             Strategy::FullPrecision};

}  // namespace

SweepResult sweep(const SweepSpec& spec) {
  if (spec.values.empty()) throw InvalidInput("sweep needs at least one value");
  if (spec.repeats < 1) throw InvalidInput("repeats must be >= 1");

  struct Job {
    std::size_t value_idx;
    int rep;
  };
  std::vector<Job> jobs;
  for (std::size_t v = 0; v < spec.values.size(); ++v)
    for (int rep = 0; rep < spec.repeats; ++rep) jobs.push_back({v, rep});

  std::vector<std::vector<SweepRow>> slots(jobs.size());
  std::atomic<std::size_t> cursor{0};
  const auto worker = [&] {
    for (;;) {
      const std::size_t j = cursor.fetch_add(1);
      if (j >= jobs.size()) return;
      const double value = spec.values[jobs[j].value_idx];
      // Seeds depend on the repeat only, so the same devices are compared
      // across sweep values.
      const std::uint64_t rep_seed =
          derive_stream_seed(spec.seed, "rep/" + std::to_string(jobs[j].rep));
      Scenario s = sweep_point_scenario(spec, value, rep_seed);
      for (Strategy strat : kAll) {
        SweepRow row;
        row.sweep_value = value;
        row.seed = rep_seed;
        row.strategy = strat;
        SolveResult r = run_strategy(strat, s, rep_seed);
        row.feasible = r.feasible;
        if (r.feasible) {
          row.objective_j = r.alloc.objective_j;
          row.h = r.alloc.h;
          row.k_rounds = r.alloc.k_rounds;
          row.eps_q = r.alloc.eps_q;
          row.q = r.alloc.q;
          row.b_hz = r.alloc.b_hz;
        }
        slots[j].push_back(std::move(row));
      }
    }
  };
  const unsigned nthreads = std::min<std::size_t>(pool_size(), jobs.size());
  std::vector<std::thread> threads;
  for (unsigned t = 1; t < nthreads; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();

  SweepResult out;
  for (auto& slot : slots)
    for (auto& row : slot) out.rows.push_back(std::move(row));

  for (std::size_t v = 0; v < spec.values.size(); ++v) {
    for (Strategy strat : kAll) {
      SweepPointStats st;
      st.sweep_value = spec.values[v];
      st.strategy = strat;
      double sum = 0, sum2 = 0;
      for (const auto& row : out.rows) {
        if (row.sweep_value != spec.values[v] || row.strategy != strat) continue;
        ++st.n_total;
        if (!row.feasible) continue;
        ++st.n_feasible;
        sum += row.objective_j;
        sum2 += row.objective_j * row.objective_j;
      }
      if (st.n_feasible > 0) {
        st.mean_objective_j = sum / st.n_feasible;
        const double var = std::max(0.0, sum2 / st.n_feasible -
                                             st.mean_objective_j * st.mean_objective_j);
        st.stddev_objective_j = std::sqrt(var);
      }
      out.stats.push_back(st);
    }
  }
  return out;
}

std::vector<int> channel_quartiles(const Scenario& s) {
  const std::size_t n = s.devices.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (s.devices[a].radio.channel_gain != s.devices[b].radio.channel_gain)
      return s.devices[a].radio.channel_gain < s.devices[b].radio.channel_gain;
    return a < b;
  });
  std::vector<int> quart(n, 0);
  for (std::size_t rank = 0; rank < n; ++rank)
    quart[order[rank]] = static_cast<int>((rank * 4) / n);
  return quart;
}

int min_q_in_worst_quartile(const Scenario& s, const Allocation& a) {
  const auto quart = channel_quartiles(s);
  int min_q = std::numeric_limits<int>::max();
  for (std::size_t i = 0; i < quart.size(); ++i)
    if (quart[i] == 0) min_q = std::min(min_q, a.q[i]);
  return min_q;
}

}  // namespace fwq
