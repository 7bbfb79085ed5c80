#include "fwq/flsim.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "fwq/errors.hpp"

namespace fwq {

Dataset make_synthetic(const SynthSpec& spec, Rng& rng) {
  Dataset d;
  d.n_features = spec.n_features;
  d.n_classes = spec.n_classes;
  std::vector<std::vector<double>> means(spec.n_classes, std::vector<double>(spec.n_features));
  for (auto& m : means)
    for (auto& v : m) v = rng.normal(0.0, spec.class_sep);
  const int total = spec.n_train + spec.n_test;
  d.x.reserve(total);
  d.y.reserve(total);
  for (int i = 0; i < total; ++i) {
    const int c = static_cast<int>(rng.pick_index(spec.n_classes));
    std::vector<double> row(spec.n_features);
    for (int j = 0; j < spec.n_features; ++j) row[j] = means[c][j] + rng.normal(0.0, spec.noise);
    d.x.push_back(std::move(row));
    d.y.push_back(c);
  }
  return d;
}

namespace {

std::uint32_t read_be32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw InvalidInput("truncated IDX header");
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw InvalidInput("cannot open " + images_path);
  if (read_be32(img) != 0x00000803u) throw InvalidInput("bad image magic in " + images_path);
  const std::uint32_t n = read_be32(img);
  const std::uint32_t rows = read_be32(img);
  const std::uint32_t cols = read_be32(img);

  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw InvalidInput("cannot open " + labels_path);
  if (read_be32(lab) != 0x00000801u) throw InvalidInput("bad label magic in " + labels_path);
  if (read_be32(lab) != n) throw InvalidInput("image/label count mismatch");

  Dataset d;
  d.n_features = static_cast<int>(rows * cols);
  std::vector<unsigned char> buf(d.n_features);
  d.x.reserve(n);
  d.y.reserve(n);
  int max_label = 0;
  for (std::uint32_t i = 0; i < n; ++i) {
    img.read(reinterpret_cast<char*>(buf.data()), buf.size());
    if (!img) throw InvalidInput("truncated image data");
    std::vector<double> row(d.n_features);
    for (int j = 0; j < d.n_features; ++j) row[j] = buf[j] / 255.0;
    d.x.push_back(std::move(row));
    char c;
    lab.read(&c, 1);
    if (!lab) throw InvalidInput("truncated label data");
    d.y.push_back(static_cast<unsigned char>(c));
    max_label = std::max(max_label, d.y.back());
  }
  d.n_classes = max_label + 1;
  return d;
}

TinyModel TinyModel::logistic(int n_features, int n_classes) {
  TinyModel m;
  m.kind = Kind::Logistic;
  m.n_features = n_features;
  m.n_classes = n_classes;
  m.tensors = {std::vector<double>(static_cast<std::size_t>(n_classes) * n_features, 0.0),
               std::vector<double>(n_classes, 0.0)};
  return m;
}

TinyModel TinyModel::mlp(int n_features, int n_classes, int hidden, Rng& init_rng) {
  TinyModel m;
  m.kind = Kind::Mlp;
  m.n_features = n_features;
  m.n_classes = n_classes;
  m.hidden = hidden;
  const double s1 = 1.0 / std::sqrt(static_cast<double>(n_features));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  m.tensors.resize(4);
  m.tensors[0].resize(static_cast<std::size_t>(hidden) * n_features);
  for (auto& v : m.tensors[0]) v = init_rng.normal(0.0, s1);
  m.tensors[1].assign(hidden, 0.0);
  m.tensors[2].resize(static_cast<std::size_t>(n_classes) * hidden);
  for (auto& v : m.tensors[2]) v = init_rng.normal(0.0, s2);
  m.tensors[3].assign(n_classes, 0.0);
  return m;
}

std::size_t TinyModel::dim() const {
  std::size_t d = 0;
  for (const auto& t : tensors) d += t.size();
  return d;
}

namespace {

void softmax_inplace(std::vector<double>& z) {
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : z) v /= sum;
}

}  // namespace

double TinyModel::loss_and_grad(const Dataset& data, std::span<const std::size_t> rows,
                                std::vector<std::vector<double>>* grad) const {
  if (grad) {
    grad->resize(tensors.size());
    for (std::size_t t = 0; t < tensors.size(); ++t) (*grad)[t].assign(tensors[t].size(), 0.0);
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  double loss = 0.0;
  std::vector<double> z(n_classes), a(hidden), dz1(hidden);
  for (std::size_t r : rows) {
    const auto& x = data.x[r];
    const int y = data.y[r];
    if (kind == Kind::Logistic) {
      for (int c = 0; c < n_classes; ++c) {
        double acc = tensors[1][c];
        const double* w = &tensors[0][static_cast<std::size_t>(c) * n_features];
        for (int j = 0; j < n_features; ++j) acc += w[j] * x[j];
        z[c] = acc;
      }
      softmax_inplace(z);
      loss -= inv * std::log(std::max(z[y], 1e-300));
      if (grad) {
        for (int c = 0; c < n_classes; ++c) {
          const double d = inv * (z[c] - (c == y ? 1.0 : 0.0));
          double* gw = &(*grad)[0][static_cast<std::size_t>(c) * n_features];
          for (int j = 0; j < n_features; ++j) gw[j] += d * x[j];
          (*grad)[1][c] += d;
        }
      }
    } else {
      for (int hthis = 0; hthis < hidden; ++hthis) {
        double acc = tensors[1][hthis];
        const double* w = &tensors[0][static_cast<std::size_t>(hthis) * n_features];
        for (int j = 0; j < n_features; ++j) acc += w[j] * x[j];
        a[hthis] = std::tanh(acc);
      }
      for (int c = 0; c < n_classes; ++c) {
        double acc = tensors[3][c];
        const double* w = &tensors[2][static_cast<std::size_t>(c) * hidden];
        for (int hthis = 0; hthis < hidden; ++hthis) acc += w[hthis] * a[hthis];
        z[c] = acc;
      }
      softmax_inplace(z);
      loss -= inv * std::log(std::max(z[y], 1e-300));
      if (grad) {
        std::fill(dz1.begin(), dz1.end(), 0.0);
        for (int c = 0; c < n_classes; ++c) {
          const double d = inv * (z[c] - (c == y ? 1.0 : 0.0));
          double* gw = &(*grad)[2][static_cast<std::size_t>(c) * hidden];
          const double* w = &tensors[2][static_cast<std::size_t>(c) * hidden];
          for (int hthis = 0; hthis < hidden; ++hthis) {
            gw[hthis] += d * a[hthis];
            dz1[hthis] += d * w[hthis];
          }
          (*grad)[3][c] += d;
        }
        for (int hthis = 0; hthis < hidden; ++hthis) {
          const double d = dz1[hthis] * (1.0 - a[hthis] * a[hthis]);
          double* gw = &(*grad)[0][static_cast<std::size_t>(hthis) * n_features];
          for (int j = 0; j < n_features; ++j) gw[j] += d * x[j];
          (*grad)[1][hthis] += d;
        }
      }
    }
  }
  return loss;
}

int TinyModel::predict(std::span<const double> x) const {
  std::vector<double> z(n_classes);
  if (kind == Kind::Logistic) {
    for (int c = 0; c < n_classes; ++c) {
      double acc = tensors[1][c];
      const double* w = &tensors[0][static_cast<std::size_t>(c) * n_features];
      for (int j = 0; j < n_features; ++j) acc += w[j] * x[j];
      z[c] = acc;
    }
  } else {
    std::vector<double> a(hidden);
    for (int hthis = 0; hthis < hidden; ++hthis) {
      double acc = tensors[1][hthis];
      const double* w = &tensors[0][static_cast<std::size_t>(hthis) * n_features];
      for (int j = 0; j < n_features; ++j) acc += w[j] * x[j];
      a[hthis] = std::tanh(acc);
    }
    for (int c = 0; c < n_classes; ++c) {
      double acc = tensors[3][c];
      const double* w = &tensors[2][static_cast<std::size_t>(c) * hidden];
      for (int hthis = 0; hthis < hidden; ++hthis) acc += w[hthis] * a[hthis];
      z[c] = acc;
    }
  }
  return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
}

double TinyModel::accuracy(const Dataset& data) const {
  if (data.size() == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (predict(data.x[i]) == data.y[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

std::vector<std::vector<std::size_t>> partition_data(const Dataset& data, int n_devices,
                                                     int label_skew, Rng& rng) {
  const int n_classes = data.n_classes;
  if (label_skew < 1 || label_skew > n_classes)
    throw PartitionError("label_skew must lie in [1, n_classes]");
  if (n_devices < 1) throw PartitionError("need at least one device");

  std::vector<std::vector<std::size_t>> pools(n_classes);
  for (std::size_t i = 0; i < data.size(); ++i) pools[data.y[i]].push_back(i);
  for (auto& p : pools) rng.shuffle(p);

  std::vector<int> classes(n_classes);
  std::iota(classes.begin(), classes.end(), 0);
  rng.shuffle(classes);

  // Device i owns label_skew classes taken cyclically from the permutation,
  // so every class has roughly the same number of owners.
  std::vector<std::vector<int>> owned(n_devices);
  std::vector<int> owners(n_classes, 0);
  for (int i = 0; i < n_devices; ++i)
    for (int j = 0; j < label_skew; ++j) {
      const int c = classes[(static_cast<std::size_t>(i) * label_skew + j) % n_classes];
      owned[i].push_back(c);
      ++owners[c];
    }

  std::vector<std::size_t> cursor(n_classes, 0);
  std::vector<std::vector<std::size_t>> shards(n_devices);
  for (int i = 0; i < n_devices; ++i) {
    for (int c : owned[i]) {
      const std::size_t quota = pools[c].size() / owners[c];
      for (std::size_t k = 0; k < quota && cursor[c] < pools[c].size(); ++k)
        shards[i].push_back(pools[c][cursor[c]++]);
    }
  }
  std::size_t target = data.size();
  for (const auto& s : shards) target = std::min(target, s.size());
  if (target == 0) throw PartitionError("dataset too small for the requested partition");
  for (auto& s : shards) s.resize(target);
  return shards;
}

void local_round(TinyModel& model, const Dataset& data, std::span<const std::size_t> shard,
                 int h_steps, int batch, double lr, const std::optional<QuantScheme>& scheme,
                 Rng& data_rng, Rng& quant_rng) {
  std::vector<std::size_t> rows(batch);
  std::vector<std::vector<double>> grad;
  for (int step = 0; step < h_steps; ++step) {
    for (auto& r : rows) r = shard[data_rng.pick_index(shard.size())];
    const double loss = model.loss_and_grad(data, rows, &grad);
    if (!std::isfinite(loss)) throw DivergenceError("non-finite local loss");
    for (std::size_t t = 0; t < model.tensors.size(); ++t)
      for (std::size_t j = 0; j < model.tensors[t].size(); ++j)
        model.tensors[t][j] -= lr * grad[t][j];
    if (scheme) {
      for (auto& tensor : model.tensors) {
        auto qv = quantize_vector(tensor, *scheme, quant_rng);
        tensor = std::move(qv.values);
      }
    }
  }
}

TinyModel aggregate(std::span<const TinyModel> locals, std::span<const double> pi) {
  if (locals.empty() || locals.size() != pi.size())
    throw DimensionMismatch("aggregate: model/weight count mismatch");
  TinyModel out = locals[0];
  for (auto& t : out.tensors) std::fill(t.begin(), t.end(), 0.0);
  for (std::size_t i = 0; i < locals.size(); ++i) {
    if (locals[i].tensors.size() != out.tensors.size())
      throw DimensionMismatch("aggregate: tensor count mismatch");
    for (std::size_t t = 0; t < out.tensors.size(); ++t) {
      if (locals[i].tensors[t].size() != out.tensors[t].size())
        throw DimensionMismatch("aggregate: tensor shape mismatch");
      for (std::size_t j = 0; j < out.tensors[t].size(); ++j)
        out.tensors[t][j] += pi[i] * locals[i].tensors[t][j];
    }
  }
  return out;
}

TrainingTrace run_fwq_fl(const SimConfig& cfg) {
  Rng root(cfg.seed);

  Dataset data;
  Dataset test;
  if (cfg.data.kind == DatasetSpec::Kind::Synthetic) {
    Rng data_rng = root.stream("data");
    SynthSpec train_spec = cfg.data.synth;
    Dataset all = make_synthetic(train_spec, data_rng);
    data.n_features = test.n_features = all.n_features;
    data.n_classes = test.n_classes = all.n_classes;
    for (std::size_t i = 0; i < all.size(); ++i) {
      auto& dst = (i < static_cast<std::size_t>(cfg.data.synth.n_train)) ? data : test;
      dst.x.push_back(std::move(all.x[i]));
      dst.y.push_back(all.y[i]);
    }
  } else {
    data = load_idx(cfg.data.images_path, cfg.data.labels_path);
    if (!cfg.data.test_images_path.empty())
      test = load_idx(cfg.data.test_images_path, cfg.data.test_labels_path);
    else
      test = data;
  }

  const int skew = cfg.label_skew > 0 ? cfg.label_skew : data.n_classes;
  Rng part_rng = root.stream("partition");
  auto shards = partition_data(data, cfg.n_devices, skew, part_rng);

  std::vector<double> pi(cfg.n_devices);
  double total = 0.0;
  for (const auto& s : shards) total += static_cast<double>(s.size());
  for (int i = 0; i < cfg.n_devices; ++i) pi[i] = static_cast<double>(shards[i].size()) / total;

  std::vector<int> q(cfg.n_devices, 0);
  for (int i = 0; i < cfg.n_devices; ++i)
    if (i < static_cast<int>(cfg.q_per_device.size())) q[i] = cfg.q_per_device[i];
  std::vector<std::optional<QuantScheme>> schemes(cfg.n_devices);
  for (int i = 0; i < cfg.n_devices; ++i)
    if (q[i] > 0) schemes[i] = make_scheme(q[i]);

  Rng init_rng = root.stream("init");
  TinyModel global = cfg.model_kind == TinyModel::Kind::Logistic
                         ? TinyModel::logistic(data.n_features, data.n_classes)
                         : TinyModel::mlp(data.n_features, data.n_classes, cfg.hidden, init_rng);

  std::vector<Rng> data_rngs, quant_rngs;
  for (int i = 0; i < cfg.n_devices; ++i) {
    data_rngs.push_back(root.stream("device-data/" + std::to_string(i)));
    quant_rngs.push_back(root.stream("device-quant/" + std::to_string(i)));
  }

  double round_energy = 0.0;
  for (int i = 0; i < cfg.n_devices; ++i) {
    const double q_energy = q[i] > 0 ? q[i] : 32.0;
    round_energy += comp_energy(cfg.energy_gpu, q_energy, cfg.h_steps) +
                    comm_energy(cfg.ref_bandwidth_hz, cfg.energy_radio, cfg.energy_net);
  }

  std::vector<std::size_t> all_rows(data.size());
  std::iota(all_rows.begin(), all_rows.end(), 0);

  TrainingTrace trace;
  trace.h_steps = cfg.h_steps;
  trace.m_batch = cfg.batch;
  trace.pi = pi;
  trace.q_bits = q;

  const double initial_loss = global.loss_and_grad(data, all_rows, nullptr);
  double scale_acc = 0.0;
  double energy_acc = 0.0;

  std::vector<TinyModel> locals(cfg.n_devices, global);
  std::vector<std::vector<double>> grad;
  for (int round = 0; round < cfg.rounds; ++round) {
    for (int i = 0; i < cfg.n_devices; ++i) {
      locals[i] = global;
      local_round(locals[i], data, shards[i], cfg.h_steps, cfg.batch, cfg.lr, schemes[i],
                  data_rngs[i], quant_rngs[i]);
    }
    global = aggregate(locals, pi);

    const double loss = global.loss_and_grad(data, all_rows, &grad);
    if (!std::isfinite(loss) || loss > 1e3 * std::max(initial_loss, 1e-12))
      throw DivergenceError("training diverged at round " + std::to_string(round));
    double gsq = 0.0;
    for (const auto& t : grad)
      for (double v : t) gsq += v * v;
    double wmax = 0.0;
    for (const auto& t : global.tensors)
      for (double v : t) wmax = std::max(wmax, std::abs(v));
    scale_acc += wmax;
    energy_acc += round_energy;

    trace.loss.push_back(loss);
    trace.grad_norm_sq.push_back(gsq);
    trace.accuracy.push_back(global.accuracy(test));
    trace.energy_j.push_back(energy_acc);
  }
  trace.weight_scale = cfg.rounds > 0 ? scale_acc / cfg.rounds : 1.0;
  trace.final_weights = global.tensors;
  return trace;
}

}  // namespace fwq
