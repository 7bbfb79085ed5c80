#pragma once

#include <string>

namespace fwq {

/// GPU power/latency parameters of one device. Units are SI (W, Hz, V, s,
/// cycles); the bit-width scalings c1(q) = c1_slope*q + c1_intercept and
/// c2(q) = c2_slope*q + c2_intercept are dimensionless.
struct GpuProfile {
  double p_g0_w = 0;               // voltage/frequency-independent power
  double zeta_mem_w_per_hz = 0;
  double zeta_core_w_per_v2hz = 0;
  double v_core_v = 0;
  double f_core_hz = 1;
  double f_mem_hz = 1;
  double t0_s = 0;                 // task-independent latency per mini-batch
  double theta_mem_cycles = 0;     // memory-access cycles per mini-batch
  double theta_core_cycles = 0;    // compute cycles per mini-batch
  double c1_slope = 0, c1_intercept = 1;
  double c2_slope = 0, c2_intercept = 1;
};

struct RadioProfile {
  double p_cm_w = 0;        // transmit power
  double channel_gain = 0;  // linear average gain over the task
};

struct NetworkConfig {
  double b_max_hz = 0;
  double noise_w = 0;
  double payload_bits = 0;  // uplink model-update size, same for all devices
  bool log2_rate = false;   // rate uses ln(1+snr) by default; log2 optional
};

struct DeviceProfile {
  std::string id;
  double pi_weight = 0;  // data weight, sums to 1 across a scenario
  GpuProfile gpu;
  RadioProfile radio;
  double mem_capacity_mb = 0;
  double model_size_mb = 0;  // full-precision footprint
};

/// Runtime power: p_g0 + zeta_mem*f_mem + zeta_core*v_core^2*f_core.
double gpu_power(const GpuProfile& g);

/// Per-mini-batch execution time t0 + c1(q)*theta_mem/f_mem + c2(q)*theta_core/f_core.
/// q may be fractional (continuous relaxation).
double gpu_time(const GpuProfile& g, double q);

/// gpu_time regrouped as slope*q + intercept; exact for all q by construction.
struct GpuTimeLinear {
  double intercept_s = 0;
  double slope_s_per_bit = 0;
  double at(double q) const { return slope_s_per_bit * q + intercept_s; }
};
GpuTimeLinear linearize_gpu_time(const GpuProfile& g);

/// Energy of h_steps mini-batch steps: h * power * time(q).
double comp_energy(const GpuProfile& g, double q, int h_steps);

/// Spectral efficiency ln(1+h*p/n0) (or log2 when configured); throws
/// ZeroRate for an unreachable device (gain <= 0).
double rate_per_hz(const RadioProfile& r, const NetworkConfig& net);

double tx_rate(double b_hz, const RadioProfile& r, const NetworkConfig& net);
double comm_time(double b_hz, const RadioProfile& r, const NetworkConfig& net);
double comm_energy(double b_hz, const RadioProfile& r, const NetworkConfig& net);

/// Bandwidth-normalized upload time: comm_time(b) == alpha1(...) / b.
double alpha1(const RadioProfile& r, const NetworkConfig& net);

/// Storage scaling c3(q) = q/32; memory constraint is c3(q)*U <= C.
double storage_scale(double q);
bool memory_feasible(const DeviceProfile& d, double q);

double dbm_to_watts(double dbm);

}  // namespace fwq
