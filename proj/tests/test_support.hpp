#pragma once

// Shared helpers for the unit tests: independent numeric oracles (finite
// differences, a naive forward pass), random object generators, and a
// scratch-directory guard.

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "deepcore/dataset.hpp"

#include "deepcore/fingerprint.hpp"
#include "deepcore/harness.hpp"
#include "deepcore/identify.hpp"
#include "deepcore/network.hpp"
#include "deepcore/random.hpp"
#include "deepcore/tensor.hpp"

namespace dctest {

using deepcore::Activation;
using deepcore::LayerSpec;
using deepcore::MlpArch;
using deepcore::Network;
using deepcore::Rng;
using deepcore::Tensor;

// Straight-line forward pass written independently of the library: returns
// the activations after every layer, entry 0 being the input itself.
inline std::vector<std::vector<double>> naive_layer_outputs(const Network& net,
                                                            const Tensor& x) {
  std::vector<std::vector<double>> acts;
  acts.push_back({x.data.begin(), x.data.end()});
  std::size_t dense_idx = 0;
  for (const LayerSpec& layer : net.layers) {
    const std::vector<double>& in = acts.back();
    if (layer.kind == LayerSpec::Kind::Dense) {
      const deepcore::DenseParams& p = net.params[dense_idx++];
      std::vector<double> out(layer.out_dim, 0.0);
      for (std::size_t r = 0; r < layer.out_dim; ++r) {
        double acc = p.bias[r];
        for (std::size_t c = 0; c < layer.in_dim; ++c) {
          acc += p.weight.at2(r, c) * in[c];
        }
        out[r] = acc;
      }
      acts.push_back(std::move(out));
    } else {
      std::vector<double> out(in.size());
      for (std::size_t i = 0; i < in.size(); ++i) {
        out[i] = layer.activation == Activation::Relu ? std::max(0.0, in[i])
                                                      : std::tanh(in[i]);
      }
      acts.push_back(std::move(out));
    }
  }
  return acts;
}

inline std::vector<double> naive_forward(const Network& net, const Tensor& x) {
  return naive_layer_outputs(net, x).back();
}

// Smallest |pre-activation| feeding any ReLU; finite differences are only
// trustworthy when the probe point sits clear of every kink.
inline double relu_kink_clearance(const Network& net, const Tensor& x) {
  std::vector<std::vector<double>> acts = naive_layer_outputs(net, x);
  double clearance = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& layer = net.layers[i];
    if (layer.kind == LayerSpec::Kind::Activation &&
        layer.activation == Activation::Relu) {
      for (double v : acts[i]) clearance = std::min(clearance, std::abs(v));
    }
  }
  return clearance;
}

// Central finite differences of logits[component] with respect to x.
inline Tensor fd_grad_logit(const Network& net, const Tensor& x,
                            std::size_t component, double step = 1e-5) {
  Tensor g = Tensor::zeros(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) {
    Tensor hi = x;
    Tensor lo = x;
    hi[i] += step;
    lo[i] -= step;
    g[i] = (deepcore::forward(net, hi)[component] -
            deepcore::forward(net, lo)[component]) /
           (2.0 * step);
  }
  return g;
}

// Central finite differences of the cross-entropy loss at `target`.
inline Tensor fd_grad_loss(const Network& net, const Tensor& x,
                           std::size_t target, double step = 1e-5) {
  Tensor g = Tensor::zeros(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) {
    Tensor hi = x;
    Tensor lo = x;
    hi[i] += step;
    lo[i] -= step;
    g[i] = (deepcore::cross_entropy(net, hi, target) -
            deepcore::cross_entropy(net, lo, target)) /
           (2.0 * step);
  }
  return g;
}

// Normwise relative error: ||a - b||_inf / max(||a||_inf, ||b||_inf).
inline double rel_err(const Tensor& a, const Tensor& b) {
  double diff = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
  }
  if (scale == 0.0) return diff;
  return diff / scale;
}

inline MlpArch random_arch(Rng& rng, bool relu) {
  MlpArch arch;
  arch.input_dim = 3 + rng.index(4);
  std::size_t depth = 1 + rng.index(2);
  for (std::size_t i = 0; i < depth; ++i) arch.hidden.push_back(4 + rng.index(5));
  arch.n_classes = 2 + static_cast<int>(rng.index(4));
  arch.activation = relu ? Activation::Relu : Activation::Tanh;
  return arch;
}

inline Tensor random_point(Rng& rng, std::size_t dim, double lo = -1.0,
                           double hi = 1.0) {
  std::vector<double> v(dim);
  for (double& e : v) e = rng.uniform(lo, hi);
  return Tensor::from_vector(std::move(v));
}

// A network whose every weight and bias is zero, so all logits vanish.
inline Network zero_net(std::size_t in_dim, std::size_t out_dim) {
  MlpArch arch{in_dim, {}, out_dim, Activation::Relu, ""};
  Network net = deepcore::make_mlp(arch, 1);
  for (deepcore::DenseParams& p : net.params) {
    std::fill(p.weight.data.begin(), p.weight.data.end(), 0.0);
    std::fill(p.bias.data.begin(), p.bias.data.end(), 0.0);
  }
  return net;
}

// Single dense layer with the given weight matrix (row-major out x in)
// and bias.
inline Network linear_net(std::size_t in_dim, std::size_t out_dim,
                          std::vector<double> weight, std::vector<double> bias) {
  Network net;
  net.layers.push_back(LayerSpec::dense(in_dim, out_dim));
  net.params.push_back({Tensor({out_dim, in_dim}, std::move(weight)),
                        Tensor::from_vector(std::move(bias))});
  net.arch_id = "linear";
  net.validate();
  return net;
}

inline deepcore::SuspectTranscript random_transcript(Rng& rng, std::size_t rows,
                                                     std::size_t cols,
                                                     const std::string& id) {
  deepcore::SuspectTranscript t;
  t.model_id = id;
  for (std::size_t r = 0; r < rows; ++r) {
    t.labels.push_back(static_cast<int>(r % cols));
    std::vector<double> row(cols);
    for (double& e : row) e = rng.uniform(-2.0, 2.0);
    // Keep every row safely away from zero norm.
    row[rng.index(cols)] += 3.0;
    t.outputs.push_back(std::move(row));
  }
  return t;
}

// Scratch directory deleted on scope exit.
struct TmpDir {
  std::filesystem::path path;

  explicit TmpDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("deepcore_" + tag + "_" + std::to_string(++counter) + "_" +
            std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TmpDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TmpDir(const TmpDir&) = delete;
  TmpDir& operator=(const TmpDir&) = delete;

  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

// Small 3-class task plus a trained victim, shared by the zoo, fingerprint,
// and identification tests. Built once; everything downstream is
// deterministic.
struct SmallRig {
  deepcore::LabeledDataset data;
  deepcore::SplitPlan split;
  MlpArch arch;
  Network victim;

  SmallRig(Activation act, const std::string& arch_id, std::uint64_t init_seed) {
    data = deepcore::make_synthetic(3, 6, 40, 0.12, 21);
    split = deepcore::split_225(data, 0.5, 22);
    arch = MlpArch{6, {10}, 3, act, arch_id};
    deepcore::TrainConfig cfg;
    cfg.epochs = 40;
    cfg.learning_rate = 0.1;
    cfg.batch_size = 16;
    cfg.seed = 23;
    victim = deepcore::train(deepcore::make_mlp(arch, init_seed), split.victim,
                             cfg).net;
  }
};

inline const SmallRig& small_rig() {
  static SmallRig rig(Activation::Relu, "rig-a", 24);
  return rig;
}

// Rig for core-point generation: a tanh victim has no inactive region, so
// the score ascent keeps a usable gradient everywhere in the clip box. The
// relu rig can park in an all-dead corner at this width, where the boundary
// radius is undefined.
inline const SmallRig& tanh_rig() {
  static SmallRig rig(Activation::Tanh, "rig-t", 24);
  return rig;
}

// Experiment sized for unit tests: a 3-class toy problem, the full 22-member
// zoo, and short schedules; runs in seconds on one core.
inline deepcore::ExperimentConfig tiny_experiment(const std::string& out_dir) {
  deepcore::ExperimentConfig cfg;
  cfg.n_classes = 3;
  cfg.dim = 6;
  cfg.n_per_class = 40;
  cfg.spread = 0.12;
  cfg.zoo.victim_arch = {6, {10}, 3, Activation::Relu, ""};
  cfg.zoo.alt_arch = {6, {14, 8}, 3, Activation::Relu, ""};
  cfg.zoo.base_train = {.epochs = 40, .learning_rate = 0.1, .batch_size = 16,
                        .seed = 0, .l2_penalty = 0.0};
  cfg.zoo.attack_train = {.epochs = 4, .learning_rate = 0.02, .batch_size = 16,
                          .seed = 0, .l2_penalty = 0.0};
  cfg.zoo.extract_label_train = {.epochs = 300, .learning_rate = 0.08,
                                 .batch_size = 16, .seed = 0, .l2_penalty = 0.0};
  cfg.zoo.extract_prob_train = {.epochs = 300, .learning_rate = 0.08,
                                .batch_size = 16, .seed = 0, .l2_penalty = 0.0};
  cfg.zoo.pgd = {.eps = 0.02, .step = 0.01, .iters = 3};
  // Toy-scale members wobble more than the desk demo; keep the quality gate
  // low enough that the build always completes.
  cfg.zoo.min_fidelity = 0.5;
  cfg.coregen.outer_max_epochs = 300;
  cfg.coregen.burst = 50;
  cfg.coregen.deepfool_max_iters = 40;
  // Narrow toy nets can go fully inactive outside the data cube; the wide
  // demo nets do not need this.
  cfg.coregen.clip = deepcore::ClipBox{0.0, 1.0};
  cfg.seed = 11;
  cfg.out_dir = out_dir;
  return cfg;
}

}  // namespace dctest
