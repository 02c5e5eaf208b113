#include "deepcore/network.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "deepcore/errors.hpp"
#include "deepcore/random.hpp"

namespace deepcore {

std::string to_string(Activation a) {
  return a == Activation::Relu ? "relu" : "tanh";
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "tanh") return Activation::Tanh;
  throw ParseError("unknown activation: " + s);
}

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out) {
  if (in == 0 || out == 0) throw DimensionError("dense layer: zero dimension");
  return LayerSpec{Kind::Dense, Activation::Relu, in, out};
}

LayerSpec LayerSpec::activation_layer(Activation a, std::size_t dim) {
  if (dim == 0) throw DimensionError("activation layer: zero dimension");
  return LayerSpec{Kind::Activation, a, dim, dim};
}

std::size_t Network::input_dim() const {
  if (layers.empty()) throw DimensionError("Network: no layers");
  return layers.front().in_dim;
}

std::size_t Network::output_dim() const {
  if (layers.empty()) throw DimensionError("Network: no layers");
  return layers.back().out_dim;
}

void Network::validate() const {
  if (layers.empty()) throw DimensionError("Network: no layers");
  std::size_t dense_seen = 0;
  std::size_t dim = layers.front().in_dim;
  for (const LayerSpec& layer : layers) {
    if (layer.in_dim != dim) {
      throw DimensionError("Network: layer dimensions do not compose");
    }
    if (layer.kind == LayerSpec::Kind::Dense) {
      if (dense_seen >= params.size()) {
        throw DimensionError("Network: missing parameters for dense layer");
      }
      const DenseParams& p = params[dense_seen];
      if (p.weight.rank() != 2 || p.weight.rows() != layer.out_dim ||
          p.weight.cols() != layer.in_dim || p.bias.size() != layer.out_dim) {
        throw DimensionError("Network: parameter shape mismatch");
      }
      p.weight.require_finite("Network weight");
      p.bias.require_finite("Network bias");
      ++dense_seen;
    } else if (layer.out_dim != layer.in_dim) {
      throw DimensionError("Network: activation layer must preserve dimension");
    }
    dim = layer.out_dim;
  }
  if (dense_seen != params.size()) {
    throw DimensionError("Network: extra parameter entries");
  }
}

Network make_mlp(const MlpArch& arch, std::uint64_t seed) {
  if (arch.input_dim == 0 || arch.n_classes < 2) {
    throw DimensionError("make_mlp: need input_dim >= 1 and n_classes >= 2");
  }
  Network net;
  net.arch_id = arch.arch_id;
  if (net.arch_id.empty()) {
    std::ostringstream id;
    id << "mlp-" << arch.input_dim;
    for (std::size_t h : arch.hidden) id << "x" << h;
    id << "x" << arch.n_classes << "-" << to_string(arch.activation);
    net.arch_id = id.str();
  }

  Rng rng(derive_seed(seed, "mlp-init"));
  std::size_t in = arch.input_dim;
  auto add_dense = [&](std::size_t out, bool with_activation) {
    net.layers.push_back(LayerSpec::dense(in, out));
    double bound = 1.0 / std::sqrt(static_cast<double>(in));
    DenseParams p;
    p.weight = Tensor::zeros({out, in});
    p.bias = Tensor::zeros({out});
    for (double& w : p.weight.data) w = rng.uniform(-bound, bound);
    for (double& b : p.bias.data) b = rng.uniform(-bound, bound);
    net.params.push_back(std::move(p));
    if (with_activation) {
      net.layers.push_back(LayerSpec::activation_layer(arch.activation, out));
    }
    in = out;
  };
  for (std::size_t h : arch.hidden) add_dense(h, true);
  add_dense(arch.n_classes, false);
  net.validate();
  return net;
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw DimensionError("softmax: empty input");
  double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

Tensor softmax(const Tensor& logits) {
  return Tensor::from_vector(softmax(logits.view()));
}

namespace {

// values[l] is the input to layer l; values[layers.size()] is the logits.
std::vector<std::vector<double>> forward_trace(const Network& net,
                                               const Tensor& x) {
  if (x.size() != net.input_dim()) {
    throw DimensionError("forward: input has length " +
                         std::to_string(x.size()) + ", network expects " +
                         std::to_string(net.input_dim()));
  }
  std::vector<std::vector<double>> values;
  values.reserve(net.layers.size() + 1);
  values.push_back(x.data);
  std::size_t dense_idx = 0;
  for (const LayerSpec& layer : net.layers) {
    const std::vector<double>& in = values.back();
    std::vector<double> out(layer.out_dim);
    if (layer.kind == LayerSpec::Kind::Dense) {
      const DenseParams& p = net.params[dense_idx++];
      for (std::size_t r = 0; r < layer.out_dim; ++r) {
        double acc = p.bias[r];
        const double* wrow = &p.weight.data[r * layer.in_dim];
        for (std::size_t c = 0; c < layer.in_dim; ++c) acc += wrow[c] * in[c];
        out[r] = acc;
      }
    } else if (layer.activation == Activation::Relu) {
      for (std::size_t i = 0; i < in.size(); ++i) {
        out[i] = in[i] > 0.0 ? in[i] : 0.0;
      }
    } else {
      for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::tanh(in[i]);
    }
    values.push_back(std::move(out));
  }
  return values;
}

}  // namespace

Tensor forward(const Network& net, const Tensor& x) {
  auto values = forward_trace(net, x);
  return Tensor::from_vector(std::move(values.back()));
}

int predicted_label(const Network& net, const Tensor& x) {
  return argmax(forward(net, x).view());
}

BackpropResult backprop(const Network& net, const Tensor& x,
                        std::span<const double> logit_seed,
                        bool want_param_grads) {
  if (logit_seed.size() != net.output_dim()) {
    throw DimensionError("backprop: seed length mismatch");
  }
  auto values = forward_trace(net, x);

  BackpropResult result;
  if (want_param_grads) {
    result.param_grads.resize(net.params.size());
  }

  std::vector<double> grad(logit_seed.begin(), logit_seed.end());
  std::size_t dense_idx = net.params.size();
  for (std::size_t l = net.layers.size(); l-- > 0;) {
    const LayerSpec& layer = net.layers[l];
    const std::vector<double>& in = values[l];
    if (layer.kind == LayerSpec::Kind::Dense) {
      const DenseParams& p = net.params[--dense_idx];
      if (want_param_grads) {
        LayerGrads& g = result.param_grads[dense_idx];
        g.weight = Tensor::zeros({layer.out_dim, layer.in_dim});
        g.bias = Tensor::from_vector(grad);
        for (std::size_t r = 0; r < layer.out_dim; ++r) {
          double* grow = &g.weight.data[r * layer.in_dim];
          for (std::size_t c = 0; c < layer.in_dim; ++c) {
            grow[c] = grad[r] * in[c];
          }
        }
      }
      std::vector<double> next(layer.in_dim, 0.0);
      for (std::size_t r = 0; r < layer.out_dim; ++r) {
        const double* wrow = &p.weight.data[r * layer.in_dim];
        for (std::size_t c = 0; c < layer.in_dim; ++c) {
          next[c] += wrow[c] * grad[r];
        }
      }
      grad = std::move(next);
    } else if (layer.activation == Activation::Relu) {
      // Subgradient 0 at the kink.
      for (std::size_t i = 0; i < grad.size(); ++i) {
        if (in[i] <= 0.0) grad[i] = 0.0;
      }
    } else {
      const std::vector<double>& out = values[l + 1];
      for (std::size_t i = 0; i < grad.size(); ++i) {
        grad[i] *= 1.0 - out[i] * out[i];
      }
    }
  }
  result.input_grad = Tensor::from_vector(std::move(grad));
  return result;
}

Tensor grad_input(const Network& net, const Tensor& x, std::size_t component) {
  if (component >= net.output_dim()) {
    throw DimensionError("grad_input: component out of range");
  }
  std::vector<double> seed(net.output_dim(), 0.0);
  seed[component] = 1.0;
  return backprop(net, x, seed, false).input_grad;
}

Tensor grad_loss_input(const Network& net, const Tensor& x,
                       std::size_t target) {
  if (target >= net.output_dim()) {
    throw DimensionError("grad_loss_input: target out of range");
  }
  std::vector<double> seed = softmax(forward(net, x).view());
  seed[target] -= 1.0;
  return backprop(net, x, seed, false).input_grad;
}

double cross_entropy(const Network& net, const Tensor& x, std::size_t target) {
  if (target >= net.output_dim()) {
    throw DimensionError("cross_entropy: target out of range");
  }
  Tensor logits = forward(net, x);
  double m = *std::max_element(logits.data.begin(), logits.data.end());
  double sum = 0.0;
  for (double z : logits.data) sum += std::exp(z - m);
  return std::log(sum) - (logits[target] - m);
}

}  // namespace deepcore
