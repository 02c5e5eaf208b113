#include "deepcore/fingerprint.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "deepcore/errors.hpp"
#include "deepcore/parallel.hpp"
#include "deepcore/random.hpp"

namespace deepcore {

namespace {

// Margins at or below this (relative) slack count as already across the
// boundary, so a point started on a tie reports radius 0 and the linear
// case finishes in one step.
constexpr double kBoundaryTol = 1e-12;

}  // namespace

std::string to_string(CoreInit init) {
  return init == CoreInit::FROM_DATA ? "from_data" : "uniform_noise";
}

CoreInit core_init_from_string(const std::string& s) {
  if (s == "from_data") return CoreInit::FROM_DATA;
  if (s == "uniform_noise") return CoreInit::UNIFORM_NOISE;
  throw ParseError("unknown core init mode: " + s);
}

void CoreGenConfig::validate() const {
  if (!(theta > 0.0)) throw std::invalid_argument("CoreGenConfig: theta must be positive");
  if (!(gamma > 0.0)) throw std::invalid_argument("CoreGenConfig: gamma must be positive");
  if (outer_max_epochs < 1) {
    throw std::invalid_argument("CoreGenConfig: outer_max_epochs must be >= 1");
  }
  if (burst < 1) throw std::invalid_argument("CoreGenConfig: burst must be >= 1");
  if (deepfool_max_iters < 1) {
    throw std::invalid_argument("CoreGenConfig: deepfool_max_iters must be >= 1");
  }
  if (overshoot < 0.0) {
    throw std::invalid_argument("CoreGenConfig: overshoot must be >= 0");
  }
  if (clip && !(clip->lo < clip->hi)) {
    throw std::invalid_argument("CoreGenConfig: clip box must have lo < hi");
  }
}

double core_loss(const Network& net, const Tensor& phi, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= net.output_dim()) {
    throw DimensionError("core_loss: label out of range");
  }
  return cross_entropy(net, phi, static_cast<std::size_t>(label));
}

DeepfoolResult deepfool_radius(const Network& net, const Tensor& x,
                               std::size_t max_iters, double overshoot) {
  if (max_iters < 1) {
    throw std::invalid_argument("deepfool_radius: max_iters must be >= 1");
  }
  if (overshoot < 0.0) {
    throw std::invalid_argument("deepfool_radius: overshoot must be >= 0");
  }
  std::size_t n_out = net.output_dim();
  if (n_out < 2) throw DegenerateGeometry("deepfool_radius: single-class model");

  Tensor start_logits = forward(net, x);
  int b = argmax(start_logits.view());

  Tensor xi = x;
  std::vector<double> accum(x.size(), 0.0);

  DeepfoolResult result;
  result.final_label = b;
  for (std::size_t j = 0; j <= max_iters; ++j) {
    Tensor logits = forward(net, xi);
    double fb = logits[b];
    double best_other = -std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < n_out; ++l) {
      if (static_cast<int>(l) != b) best_other = std::max(best_other, logits[l]);
    }
    double margin = fb - best_other;
    if (margin <= kBoundaryTol * (1.0 + std::fabs(fb))) {
      result.radius = l2_norm(accum);
      result.iters = j;
      result.final_label = argmax(logits.view());
      result.converged = true;
      return result;
    }
    if (j == max_iters) break;

    Tensor grad_b = grad_input(net, xi, static_cast<std::size_t>(b));
    double best_ratio = std::numeric_limits<double>::infinity();
    std::vector<double> best_w;
    double best_df = 0.0;
    for (std::size_t l = 0; l < n_out; ++l) {
      if (static_cast<int>(l) == b) continue;
      Tensor grad_l = grad_input(net, xi, l);
      std::vector<double> w(x.size());
      for (std::size_t m = 0; m < w.size(); ++m) w[m] = grad_l[m] - grad_b[m];
      double norm = l2_norm(w);
      if (norm == 0.0) continue;
      double df = std::fabs(logits[l] - fb);
      double ratio = df / norm;
      if (ratio < best_ratio) {
        best_ratio = ratio;
        best_w = std::move(w);
        best_df = df;
      }
    }
    if (best_w.empty()) {
      throw DegenerateGeometry(
          "deepfool_radius: every boundary direction has zero gradient");
    }
    double wnorm2 = dot(best_w, best_w);
    double coeff = (1.0 + overshoot) * best_df / wnorm2;
    for (std::size_t m = 0; m < best_w.size(); ++m) {
      double delta = coeff * best_w[m];
      xi[m] += delta;
      accum[m] += delta;
    }
  }

  Tensor logits = forward(net, xi);
  result.radius = l2_norm(accum);
  result.iters = max_iters;
  result.final_label = argmax(logits.view());
  result.converged = false;
  return result;
}

CoreGenResult generate_core_point(const Network& net, int label,
                                  const CoreGenConfig& cfg,
                                  const LabeledDataset* init_pool) {
  cfg.validate();
  net.validate();
  if (label < 0 || static_cast<std::size_t>(label) >= net.output_dim()) {
    throw DimensionError("generate_core_point: label out of range");
  }

  Rng rng(derive_seed(cfg.seed, "core-init-" + std::to_string(label)));
  Tensor phi;
  if (cfg.init == CoreInit::FROM_DATA) {
    if (init_pool == nullptr) {
      throw std::invalid_argument(
          "generate_core_point: FROM_DATA needs an init pool");
    }
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < init_pool->size(); ++i) {
      if (init_pool->ys[i] == label) candidates.push_back(i);
    }
    if (candidates.empty()) {
      throw Error("generate_core_point: init pool has no samples of label " +
                  std::to_string(label));
    }
    phi = init_pool->xs[candidates[rng.index(candidates.size())]];
  } else {
    ClipBox box = cfg.clip.value_or(ClipBox{0.0, 1.0});
    phi = Tensor::zeros({net.input_dim()});
    for (std::size_t m = 0; m < phi.size(); ++m) {
      phi[m] = rng.uniform(box.lo, box.hi);
    }
  }

  auto clip_point = [&](Tensor& p) {
    if (!cfg.clip) return;
    for (std::size_t m = 0; m < p.size(); ++m) {
      p[m] = std::clamp(p[m], cfg.clip->lo, cfg.clip->hi);
    }
  };
  clip_point(phi);

  auto eval_score = [&](const Tensor& p) {
    return forward(net, p)[static_cast<std::size_t>(label)];
  };
  auto eval_radius = [&](const Tensor& p) {
    return deepfool_radius(net, p, cfg.deepfool_max_iters, cfg.overshoot).radius;
  };

  CoreGenResult result;
  result.trace.push_back({0, eval_score(phi), eval_radius(phi), phi});
  double r_prev = result.trace.front().radius;

  std::size_t steps = 0;
  while (steps < cfg.outer_max_epochs && !result.converged) {
    std::size_t burst_end = std::min(cfg.outer_max_epochs, steps + cfg.burst);
    for (; steps < burst_end; ++steps) {
      Tensor g = grad_loss_input(net, phi, static_cast<std::size_t>(label));
      for (std::size_t m = 0; m < phi.size(); ++m) phi[m] -= cfg.theta * g[m];
      clip_point(phi);
    }
    double score = eval_score(phi);
    double radius = eval_radius(phi);
    result.trace.push_back({steps, score, radius, phi});
    if (std::fabs(radius - r_prev) < cfg.gamma) result.converged = true;
    r_prev = radius;
  }

  const CoreCheckpoint& last = result.trace.back();
  if (predicted_label(net, last.point) != label) {
    throw Error("generate_core_point: final point for label " +
                std::to_string(label) + " is classified as label " +
                std::to_string(predicted_label(net, last.point)));
  }
  result.core.label = label;
  result.core.point = last.point;
  result.core.radius = last.radius;
  result.core.score = last.score;
  result.core.epochs_used = steps;
  return result;
}

FingerprintResult generate_fingerprint(const Network& net,
                                       const CoreGenConfig& cfg,
                                       const LabeledDataset* init_pool,
                                       std::size_t top_k, std::size_t threads,
                                       const std::string& victim_id) {
  std::size_t n = net.output_dim();
  if (top_k > n) {
    throw std::invalid_argument("generate_fingerprint: top_k exceeds label count");
  }

  FingerprintResult result;
  result.per_label.resize(n);
  parallel_for(n, threads, [&](std::size_t i) {
    try {
      result.per_label[i] =
          generate_core_point(net, static_cast<int>(i), cfg, init_pool);
    } catch (const Error& e) {
      throw Error("generate_fingerprint: label " + std::to_string(i) +
                  " failed: " + e.what());
    }
  });

  std::vector<std::size_t> keep(n);
  std::iota(keep.begin(), keep.end(), 0);
  if (top_k > 0 && top_k < n) {
    std::stable_sort(keep.begin(), keep.end(), [&](std::size_t a, std::size_t b) {
      return result.per_label[a].core.radius > result.per_label[b].core.radius;
    });
    keep.resize(top_k);
    std::sort(keep.begin(), keep.end());
  }

  result.fingerprint.victim_id = victim_id;
  for (std::size_t i : keep) {
    result.fingerprint.core_points.push_back(result.per_label[i].core);
  }
  return result;
}

}  // namespace deepcore
