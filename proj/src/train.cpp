#include "deepcore/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "deepcore/errors.hpp"
#include "deepcore/random.hpp"

namespace deepcore {

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
  if (batch_size < 1) {
    throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  }
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("TrainConfig: learning_rate must be positive");
  }
  if (l2_penalty < 0.0) {
    throw std::invalid_argument("TrainConfig: l2_penalty must be >= 0");
  }
}

double accuracy(const Network& net, const LabeledDataset& data) {
  if (data.size() == 0) throw Error("accuracy: empty dataset");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (predicted_label(net, data.xs[i]) == data.ys[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

double agreement(const Network& a, const Network& b,
                 const std::vector<Tensor>& xs) {
  if (xs.empty()) throw Error("agreement: empty input set");
  std::size_t hits = 0;
  for (const Tensor& x : xs) {
    if (predicted_label(a, x) == predicted_label(b, x)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(xs.size());
}

namespace {

void apply_zero_columns(Network& net, const TrainConstraints& constraints) {
  for (const auto& [dense_idx, cols] : constraints.zeroed_columns) {
    if (dense_idx >= net.params.size()) {
      throw DimensionError("TrainConstraints: dense index out of range");
    }
    Tensor& w = net.params[dense_idx].weight;
    for (std::size_t c : cols) {
      if (c >= w.cols()) {
        throw DimensionError("TrainConstraints: column out of range");
      }
      for (std::size_t r = 0; r < w.rows(); ++r) w.at2(r, c) = 0.0;
    }
  }
}

TrainResult run_sgd(const Network& start, const std::vector<Tensor>& xs,
                    const std::vector<std::vector<double>>& targets,
                    const TrainConfig& cfg,
                    const TrainConstraints& constraints) {
  cfg.validate();
  start.validate();
  if (xs.empty()) throw std::invalid_argument("train: empty dataset");
  if (xs.size() != targets.size()) {
    throw DimensionError("train: inputs/targets length mismatch");
  }
  std::size_t n_out = start.output_dim();
  for (const auto& t : targets) {
    if (t.size() != n_out) {
      throw DimensionError("train: target length does not match class count");
    }
  }

  Network net = start;
  apply_zero_columns(net, constraints);

  auto trainable = [&](std::size_t dense_idx) {
    return !constraints.trainable_dense ||
           constraints.trainable_dense->count(dense_idx) > 0;
  };

  Rng rng(derive_seed(cfg.seed, "sgd-shuffle"));
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);

  double last_epoch_loss = 0.0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start_idx = 0; start_idx < order.size();
         start_idx += cfg.batch_size) {
      std::size_t end_idx =
          std::min(order.size(), start_idx + cfg.batch_size);
      std::size_t batch = end_idx - start_idx;

      std::vector<LayerGrads> acc(net.params.size());
      for (std::size_t d = 0; d < net.params.size(); ++d) {
        acc[d].weight = Tensor::zeros(net.params[d].weight.shape);
        acc[d].bias = Tensor::zeros(net.params[d].bias.shape);
      }

      double batch_loss = 0.0;
      for (std::size_t k = start_idx; k < end_idx; ++k) {
        std::size_t i = order[k];
        Tensor logits = forward(net, xs[i]);
        std::vector<double> probs = softmax(logits.view());
        // Cross-entropy against the target distribution, in log space.
        double m = *std::max_element(logits.data.begin(), logits.data.end());
        double lse = 0.0;
        for (double z : logits.data) lse += std::exp(z - m);
        lse = std::log(lse) + m;
        double sample_loss = 0.0;
        std::vector<double> seed(n_out);
        for (std::size_t j = 0; j < n_out; ++j) {
          sample_loss += targets[i][j] * (lse - logits[j]);
          seed[j] = probs[j] - targets[i][j];
        }
        batch_loss += sample_loss;

        BackpropResult bp = backprop(net, xs[i], seed, true);
        for (std::size_t d = 0; d < net.params.size(); ++d) {
          for (std::size_t j = 0; j < acc[d].weight.size(); ++j) {
            acc[d].weight[j] += bp.param_grads[d].weight[j];
          }
          for (std::size_t j = 0; j < acc[d].bias.size(); ++j) {
            acc[d].bias[j] += bp.param_grads[d].bias[j];
          }
        }
      }
      batch_loss /= static_cast<double>(batch);
      if (!std::isfinite(batch_loss)) {
        throw TrainingDiverged(
            "train: non-finite loss at epoch " + std::to_string(epoch) +
            ", batch starting at " + std::to_string(start_idx) +
            " (loss=" + std::to_string(batch_loss) + ")");
      }
      epoch_loss += batch_loss * static_cast<double>(batch);

      double scale = cfg.learning_rate / static_cast<double>(batch);
      for (std::size_t d = 0; d < net.params.size(); ++d) {
        if (!trainable(d)) continue;
        Tensor& w = net.params[d].weight;
        Tensor& b = net.params[d].bias;
        for (std::size_t j = 0; j < w.size(); ++j) {
          w[j] -= scale * acc[d].weight[j] +
                  cfg.learning_rate * cfg.l2_penalty * w[j];
        }
        for (std::size_t j = 0; j < b.size(); ++j) {
          b[j] -= scale * acc[d].bias[j];
        }
      }
      apply_zero_columns(net, constraints);
    }
    last_epoch_loss = epoch_loss / static_cast<double>(xs.size());
  }

  TrainResult result;
  result.net = std::move(net);
  result.final_loss = last_epoch_loss;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    int want = argmax(std::span<const double>(targets[i]));
    if (predicted_label(result.net, xs[i]) == want) ++hits;
  }
  result.train_accuracy =
      static_cast<double>(hits) / static_cast<double>(xs.size());
  return result;
}

}  // namespace

TrainResult train(const Network& net, const LabeledDataset& data,
                  const TrainConfig& cfg, const TrainConstraints& constraints) {
  if (data.size() == 0) throw std::invalid_argument("train: empty dataset");
  std::size_t n_out = net.output_dim();
  std::vector<std::vector<double>> targets;
  targets.reserve(data.size());
  for (int y : data.ys) {
    if (y < 0 || static_cast<std::size_t>(y) >= n_out) {
      throw DimensionError("train: label " + std::to_string(y) +
                           " out of range for " + std::to_string(n_out) +
                           " classes");
    }
    std::vector<double> t(n_out, 0.0);
    t[y] = 1.0;
    targets.push_back(std::move(t));
  }
  return run_sgd(net, data.xs, targets, cfg, constraints);
}

TrainResult train_soft(const Network& net, const std::vector<Tensor>& xs,
                       const std::vector<std::vector<double>>& targets,
                       const TrainConfig& cfg,
                       const TrainConstraints& constraints) {
  return run_sgd(net, xs, targets, cfg, constraints);
}

}  // namespace deepcore
