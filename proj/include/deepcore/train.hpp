#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "deepcore/dataset.hpp"
#include "deepcore/network.hpp"

namespace deepcore {

struct TrainConfig {
  std::size_t epochs = 1;
  double learning_rate = 0.05;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  double l2_penalty = 0.0;  // weight decay on weights, not biases

  void validate() const;
};

// Restrictions applied during SGD: frozen layers and pruned units.
struct TrainConstraints {
  // Dense-layer indices allowed to move; absent means all.
  std::optional<std::set<std::size_t>> trainable_dense;
  // dense index -> input columns pinned to zero before and throughout
  // training (outgoing weights of pruned units in the previous layer).
  std::map<std::size_t, std::vector<std::size_t>> zeroed_columns;
};

struct TrainResult {
  Network net;
  double train_accuracy = 0.0;  // argmax match against the training targets
  double final_loss = 0.0;      // mean cross-entropy after the last epoch
};

double accuracy(const Network& net, const LabeledDataset& data);

// Fraction of inputs on which both networks predict the same label.
double agreement(const Network& a, const Network& b,
                 const std::vector<Tensor>& xs);

// Minibatch SGD on mean cross-entropy. Deterministic given the seed: fixed
// shuffle order, fixed batch boundaries. Throws TrainingDiverged if the loss
// goes non-finite.
TrainResult train(const Network& net, const LabeledDataset& data,
                  const TrainConfig& cfg,
                  const TrainConstraints& constraints = {});

// Soft-target variant: each target is a probability vector over classes.
// Used for probability-based distillation of a black-box model.
TrainResult train_soft(const Network& net, const std::vector<Tensor>& xs,
                       const std::vector<std::vector<double>>& targets,
                       const TrainConfig& cfg,
                       const TrainConstraints& constraints = {});

}  // namespace deepcore
