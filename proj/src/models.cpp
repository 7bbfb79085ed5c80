#include "fwq/models.hpp"

#include <cmath>

#include "fwq/errors.hpp"

namespace fwq {

double gpu_power(const GpuProfile& g) {
  return g.p_g0_w + g.zeta_mem_w_per_hz * g.f_mem_hz +
         g.zeta_core_w_per_v2hz * g.v_core_v * g.v_core_v * g.f_core_hz;
}

double gpu_time(const GpuProfile& g, double q) {
  const double c1 = g.c1_slope * q + g.c1_intercept;
  const double c2 = g.c2_slope * q + g.c2_intercept;
  return g.t0_s + c1 * g.theta_mem_cycles / g.f_mem_hz + c2 * g.theta_core_cycles / g.f_core_hz;
}

GpuTimeLinear linearize_gpu_time(const GpuProfile& g) {
  GpuTimeLinear lin;
  lin.slope_s_per_bit = g.c1_slope * g.theta_mem_cycles / g.f_mem_hz +
                        g.c2_slope * g.theta_core_cycles / g.f_core_hz;
  lin.intercept_s = g.t0_s + g.c1_intercept * g.theta_mem_cycles / g.f_mem_hz +
                    g.c2_intercept * g.theta_core_cycles / g.f_core_hz;
  return lin;
}

double comp_energy(const GpuProfile& g, double q, int h_steps) {
  if (h_steps < 1) throw InvalidInput("h_steps must be >= 1");
  return static_cast<double>(h_steps) * gpu_power(g) * gpu_time(g, q);
}

double rate_per_hz(const RadioProfile& r, const NetworkConfig& net) {
  if (!(r.channel_gain > 0.0)) throw ZeroRate("device unreachable: zero channel gain");
  const double snr = r.channel_gain * r.p_cm_w / net.noise_w;
  const double nats = std::log1p(snr);
  return net.log2_rate ? nats / std::log(2.0) : nats;
}

double tx_rate(double b_hz, const RadioProfile& r, const NetworkConfig& net) {
  if (!(b_hz > 0.0)) throw InvalidInput("bandwidth must be positive");
  return b_hz * rate_per_hz(r, net);
}

double comm_time(double b_hz, const RadioProfile& r, const NetworkConfig& net) {
  return net.payload_bits / tx_rate(b_hz, r, net);
}

double comm_energy(double b_hz, const RadioProfile& r, const NetworkConfig& net) {
  return r.p_cm_w * comm_time(b_hz, r, net);
}

double alpha1(const RadioProfile& r, const NetworkConfig& net) {
  return net.payload_bits / rate_per_hz(r, net);
}

double storage_scale(double q) { return q / 32.0; }

bool memory_feasible(const DeviceProfile& d, double q) {
  return storage_scale(q) * d.model_size_mb <= d.mem_capacity_mb;
}

double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

}  // namespace fwq
