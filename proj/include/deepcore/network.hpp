#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "deepcore/tensor.hpp"

namespace deepcore {

enum class Activation { Relu, Tanh };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct LayerSpec {
  enum class Kind { Dense, Activation };

  Kind kind = Kind::Dense;
  Activation activation = Activation::Relu;  // used when kind == Activation
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;

  static LayerSpec dense(std::size_t in, std::size_t out);
  static LayerSpec activation_layer(Activation a, std::size_t dim);
};

struct DenseParams {
  Tensor weight;  // out_dim x in_dim
  Tensor bias;    // out_dim

  bool operator==(const DenseParams&) const = default;
};

// Feed-forward classifier. Outputs are raw last-layer logits; no terminal
// softmax is applied.
struct Network {
  std::vector<LayerSpec> layers;
  std::vector<DenseParams> params;  // one entry per dense layer, in order
  std::string arch_id;

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t dense_count() const { return params.size(); }
  void validate() const;
};

// Width/activation description for building fresh MLPs. arch_id tags
// architectures so same-vs-different architecture comparisons are explicit.
struct MlpArch {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden;
  std::size_t n_classes = 0;
  Activation activation = Activation::Relu;
  std::string arch_id;  // synthesized from dims/activation when empty
};

// Fresh MLP with weights and biases uniform in +-1/sqrt(fan_in).
Network make_mlp(const MlpArch& arch, std::uint64_t seed);

// Numerically safe softmax (max-subtraction). Entries sum to 1.
std::vector<double> softmax(std::span<const double> logits);
Tensor softmax(const Tensor& logits);

Tensor forward(const Network& net, const Tensor& x);
int predicted_label(const Network& net, const Tensor& x);

// d logits[component] / d x via reverse-mode differentiation.
Tensor grad_input(const Network& net, const Tensor& x, std::size_t component);

// d(-log softmax(f(x))[target]) / d x.
Tensor grad_loss_input(const Network& net, const Tensor& x, std::size_t target);

// -log softmax(f(x))[target], evaluated in log-space so extreme logits do
// not overflow.
double cross_entropy(const Network& net, const Tensor& x, std::size_t target);

struct LayerGrads {
  Tensor weight;
  Tensor bias;
};

struct BackpropResult {
  Tensor input_grad;
  std::vector<LayerGrads> param_grads;  // empty unless requested
};

// Shared reverse pass. logit_seed is dL/dlogits.
BackpropResult backprop(const Network& net, const Tensor& x,
                        std::span<const double> logit_seed,
                        bool want_param_grads);

}  // namespace deepcore
