#pragma once

#include <vector>

namespace fwq {

/// Per-round record of one simulated training run, plus the run settings the
/// coefficient fit needs (local steps, batch size, data weights, per-device
/// bit-widths, and the mean weight scale seen during the run).
struct TrainingTrace {
  std::vector<double> loss;
  std::vector<double> grad_norm_sq;  // full-data average-squared gradient norm
  std::vector<double> accuracy;
  std::vector<double> energy_j;      // cumulative modeled energy

  std::vector<std::vector<double>> final_weights;  // one vector per tensor

  double h_steps = 1;
  double m_batch = 1;
  std::vector<double> pi;
  std::vector<int> q_bits;  // 0 = quantization bypassed
  double weight_scale = 1.0;

  std::size_t rounds() const { return grad_norm_sq.size(); }
};

}  // namespace fwq
