#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fwq/models.hpp"
#include "fwq/quantizer.hpp"
#include "fwq/rng.hpp"
#include "fwq/trace.hpp"

namespace fwq {

struct SynthSpec {
  int n_train = 2000;
  int n_test = 500;
  int n_features = 20;
  int n_classes = 10;
  double class_sep = 2.0;  // radius of the class-mean cloud
  double noise = 1.0;      // within-class standard deviation
};

struct DatasetSpec {
  enum class Kind { Synthetic, Idx } kind = Kind::Synthetic;
  SynthSpec synth;
  std::string images_path, labels_path;          // IDX files
  std::string test_images_path, test_labels_path;  // optional
};

struct Dataset {
  int n_features = 0;
  int n_classes = 0;
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  std::size_t size() const { return y.size(); }
};

Dataset make_synthetic(const SynthSpec& spec, Rng& rng);

/// IDX image/label pair (magic 0x00000803 / 0x00000801, big-endian dims);
/// pixels are scaled to [0, 1].
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

struct TinyModel {
  enum class Kind { Logistic, Mlp };
  Kind kind = Kind::Logistic;
  int n_features = 0, n_classes = 0, hidden = 0;
  // Logistic: {W (C x F), bias (C)}. Mlp: {W1 (H x F), b1, W2 (C x H), b2}.
  std::vector<std::vector<double>> tensors;

  static TinyModel logistic(int n_features, int n_classes);
  static TinyModel mlp(int n_features, int n_classes, int hidden, Rng& init_rng);

  std::size_t dim() const;
  /// Mean cross-entropy over the given rows; accumulates the mean gradient
  /// into `grad` (same tensor shapes) when non-null.
  double loss_and_grad(const Dataset& data, std::span<const std::size_t> rows,
                       std::vector<std::vector<double>>* grad) const;
  int predict(std::span<const double> x) const;
  double accuracy(const Dataset& data) const;
};

/// Equal-size shards of `label_skew` classes each; class assignment and
/// sample order are drawn from the stream. Throws PartitionError when the
/// dataset cannot fill the shards.
std::vector<std::vector<std::size_t>> partition_data(const Dataset& data, int n_devices,
                                                     int label_skew, Rng& rng);

/// h_steps of mini-batch SGD, each step followed by stochastic-rounding
/// quantization of every tensor at its own inf-norm scale (skipped when
/// scheme is empty). Throws DivergenceError on a non-finite loss.
void local_round(TinyModel& model, const Dataset& data, std::span<const std::size_t> shard,
                 int h_steps, int batch, double lr, const std::optional<QuantScheme>& scheme,
                 Rng& data_rng, Rng& quant_rng);

/// Full-precision weighted average, summed in ascending device order.
TinyModel aggregate(std::span<const TinyModel> locals, std::span<const double> pi);

struct SimConfig {
  int n_devices = 4;
  int h_steps = 5;
  int rounds = 200;
  int batch = 32;
  double lr = 0.05;
  std::vector<int> q_per_device;  // bit-widths; 0 bypasses quantization
  std::uint64_t seed = 1;
  DatasetSpec data;
  int label_skew = 0;  // 0 = every class on every device
  TinyModel::Kind model_kind = TinyModel::Kind::Logistic;
  int hidden = 16;

  // Reference hardware used only for the modeled energy column of the trace.
  GpuProfile energy_gpu{2.0, 5e-10, 2e-10, 0.9, 1.1e9, 1.5e9,
                        0.1,  1e9,  2e9,   7.12e-3, 0.274, 4.24e-4, 1.035};
  RadioProfile energy_radio{0.1, 1e-3};
  NetworkConfig energy_net{100e6, 3.9810717055349565e-21, 2e10, false};
  double ref_bandwidth_hz = 10e6;
};

/// One full federated run: broadcast, parallel local rounds, full-precision
/// aggregation; repeated `rounds` times with everything derived from the seed.
TrainingTrace run_fwq_fl(const SimConfig& cfg);

}  // namespace fwq
