#include "deepcore/zoo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <stdexcept>

#include "deepcore/errors.hpp"
#include "deepcore/parallel.hpp"
#include "deepcore/random.hpp"

namespace deepcore {

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::VICTIM: return "victim";
    case ModelKind::HM_SA: return "hm_sa";
    case ModelKind::HM_DA: return "hm_da";
    case ModelKind::PM_P: return "pm_p";
    case ModelKind::PM_FL: return "pm_fl";
    case ModelKind::PM_FA: return "pm_fa";
    case ModelKind::PM_ADV: return "pm_adv";
    case ModelKind::EM_SA_L: return "em_sa_l";
    case ModelKind::EM_DA_L: return "em_da_l";
    case ModelKind::EM_SA_PR: return "em_sa_pr";
    case ModelKind::EM_DA_PR: return "em_da_pr";
  }
  throw Error("to_string: bad ModelKind");
}

ModelKind model_kind_from_string(const std::string& s) {
  static const std::map<std::string, ModelKind> table = {
      {"victim", ModelKind::VICTIM},   {"hm_sa", ModelKind::HM_SA},
      {"hm_da", ModelKind::HM_DA},     {"pm_p", ModelKind::PM_P},
      {"pm_fl", ModelKind::PM_FL},     {"pm_fa", ModelKind::PM_FA},
      {"pm_adv", ModelKind::PM_ADV},   {"em_sa_l", ModelKind::EM_SA_L},
      {"em_da_l", ModelKind::EM_DA_L}, {"em_sa_pr", ModelKind::EM_SA_PR},
      {"em_da_pr", ModelKind::EM_DA_PR}};
  auto it = table.find(s);
  if (it == table.end()) throw ParseError("unknown model kind: " + s);
  return it->second;
}

std::string to_string(KindGroup g) {
  switch (g) {
    case KindGroup::VICTIM: return "victim";
    case KindGroup::HM: return "hm";
    case KindGroup::PM: return "pm";
    case KindGroup::EM: return "em";
  }
  throw Error("to_string: bad KindGroup");
}

KindGroup kind_group(ModelKind k) {
  switch (k) {
    case ModelKind::VICTIM: return KindGroup::VICTIM;
    case ModelKind::HM_SA:
    case ModelKind::HM_DA: return KindGroup::HM;
    case ModelKind::PM_P:
    case ModelKind::PM_FL:
    case ModelKind::PM_FA:
    case ModelKind::PM_ADV: return KindGroup::PM;
    default: return KindGroup::EM;
  }
}

bool is_piracy(ModelKind k) {
  KindGroup g = kind_group(k);
  return g == KindGroup::PM || g == KindGroup::EM;
}

LabelApi::LabelApi(const Network& net, std::string owner_id)
    : net_(&net), owner_id_(std::move(owner_id)) {}

int LabelApi::label(const Tensor& x) const { return predicted_label(*net_, x); }

std::size_t LabelApi::n_classes() const { return net_->output_dim(); }

ScoreApi::ScoreApi(const Network& net, std::string owner_id)
    : net_(&net), owner_id_(std::move(owner_id)) {}

std::vector<double> ScoreApi::logits(const Tensor& x) const {
  return forward(*net_, x).data;
}

std::vector<double> ScoreApi::probabilities(const Tensor& x) const {
  return softmax(std::span<const double>(forward(*net_, x).data));
}

int ScoreApi::label(const Tensor& x) const { return predicted_label(*net_, x); }

std::size_t ScoreApi::n_classes() const { return net_->output_dim(); }

Network fine_tune(const Network& victim, const LabeledDataset& data,
                  const TrainConfig& cfg, TuneScope scope) {
  if (cfg.epochs == 0) return victim;
  TrainConstraints constraints;
  if (scope == TuneScope::LAST_LAYER) {
    constraints.trainable_dense = {victim.dense_count() - 1};
  }
  return train(victim, data, cfg, constraints).net;
}

namespace {

std::string format_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

// Activations feeding the final dense layer (the input itself when the
// network has a single dense layer).
std::vector<double> hidden_before_last_dense(const Network& net,
                                             const Tensor& x) {
  std::vector<double> cur = x.data;
  std::size_t dense_seen = 0;
  for (const LayerSpec& layer : net.layers) {
    if (layer.kind == LayerSpec::Kind::Dense) {
      if (dense_seen + 1 == net.dense_count()) return cur;
      const DenseParams& p = net.params[dense_seen];
      std::vector<double> out(layer.out_dim, 0.0);
      for (std::size_t r = 0; r < layer.out_dim; ++r) {
        double acc = p.bias[r];
        for (std::size_t c = 0; c < layer.in_dim; ++c) {
          acc += p.weight.at2(r, c) * cur[c];
        }
        out[r] = acc;
      }
      cur = std::move(out);
      ++dense_seen;
    } else if (layer.activation == Activation::Relu) {
      for (double& v : cur) v = v > 0.0 ? v : 0.0;
    } else {
      for (double& v : cur) v = std::tanh(v);
    }
  }
  return cur;
}

void zero_columns(Network& net, std::size_t dense_idx,
                  const std::vector<std::size_t>& cols) {
  Tensor& w = net.params[dense_idx].weight;
  for (std::size_t c : cols) {
    for (std::size_t r = 0; r < w.rows(); ++r) w.at2(r, c) = 0.0;
  }
}

}  // namespace

std::vector<std::size_t> rank_units_by_activation(
    const Network& net, const std::vector<Tensor>& xs) {
  if (xs.empty()) {
    throw std::invalid_argument("rank_units_by_activation: empty sample set");
  }
  net.validate();
  std::size_t width = net.params.back().weight.cols();
  std::vector<double> mean_abs(width, 0.0);
  for (const Tensor& x : xs) {
    std::vector<double> h = hidden_before_last_dense(net, x);
    for (std::size_t i = 0; i < width; ++i) mean_abs[i] += std::fabs(h[i]);
  }
  for (double& v : mean_abs) v /= static_cast<double>(xs.size());
  std::vector<std::size_t> idx(width);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return mean_abs[a] < mean_abs[b];
  });
  return idx;
}

Network fine_prune(const Network& victim, const LabeledDataset& data,
                   const TrainConfig& cfg, double prune_fraction) {
  if (!(prune_fraction > 0.0 && prune_fraction < 1.0)) {
    throw std::invalid_argument(
        "fine_prune: prune_fraction must be strictly inside (0, 1)");
  }
  std::vector<std::size_t> rank = rank_units_by_activation(victim, data.xs);
  std::size_t n_prune =
      static_cast<std::size_t>(prune_fraction * static_cast<double>(rank.size()));
  std::vector<std::size_t> cols(rank.begin(), rank.begin() + n_prune);
  std::size_t last_dense = victim.dense_count() - 1;
  if (cfg.epochs == 0) {
    Network out = victim;
    zero_columns(out, last_dense, cols);
    return out;
  }
  TrainConstraints constraints;
  constraints.zeroed_columns[last_dense] = cols;
  return train(victim, data, cfg, constraints).net;
}

Tensor pgd_example(const Network& net, const Tensor& x, int label,
                   const PgdConfig& pgd) {
  if (label < 0 || static_cast<std::size_t>(label) >= net.output_dim()) {
    throw DimensionError("pgd_example: label out of range");
  }
  if (pgd.eps < 0.0 || pgd.step < 0.0) {
    throw std::invalid_argument("pgd_example: eps and step must be >= 0");
  }
  Tensor adv = x;
  for (std::size_t it = 0; it < pgd.iters; ++it) {
    Tensor g = grad_loss_input(net, adv, static_cast<std::size_t>(label));
    for (std::size_t j = 0; j < adv.size(); ++j) {
      double s = g[j] > 0.0 ? 1.0 : (g[j] < 0.0 ? -1.0 : 0.0);
      double v = adv[j] + pgd.step * s;
      v = std::min(v, std::min(1.0, x[j] + pgd.eps));
      v = std::max(v, std::max(0.0, x[j] - pgd.eps));
      adv[j] = v;
    }
  }
  return adv;
}

Network adversarial_train(const Network& victim, const LabeledDataset& data,
                          const TrainConfig& cfg, const PgdConfig& pgd) {
  cfg.validate();
  data.validate();
  if (data.size() == 0) {
    throw std::invalid_argument("adversarial_train: empty dataset");
  }

  Network net = victim;
  Rng rng(derive_seed(cfg.seed, "sgd-shuffle"));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  // Accumulates loss gradients for one half of a batch into acc; the clean
  // and adversarial halves are summed separately and then added, so a
  // zero-iteration attack reduces exactly to plain fine-tuning.
  auto accumulate = [&](const std::vector<Tensor>& inputs,
                        const std::vector<int>& labels, std::size_t lo,
                        std::size_t hi, std::vector<LayerGrads>& acc,
                        bool indirect) -> double {
    double loss = 0.0;
    for (std::size_t k = lo; k < hi; ++k) {
      std::size_t i = indirect ? order[k] : k;
      const Tensor& x = inputs[i];
      int y = labels[i];
      Tensor logits = forward(net, x);
      std::vector<double> probs = softmax(logits.view());
      loss += cross_entropy(net, x, static_cast<std::size_t>(y));
      std::vector<double> seed = probs;
      seed[static_cast<std::size_t>(y)] -= 1.0;
      BackpropResult bp = backprop(net, x, seed, true);
      for (std::size_t d = 0; d < net.params.size(); ++d) {
        for (std::size_t j = 0; j < acc[d].weight.size(); ++j) {
          acc[d].weight[j] += bp.param_grads[d].weight[j];
        }
        for (std::size_t j = 0; j < acc[d].bias.size(); ++j) {
          acc[d].bias[j] += bp.param_grads[d].bias[j];
        }
      }
    }
    return loss;
  };

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start_idx = 0; start_idx < order.size();
         start_idx += cfg.batch_size) {
      std::size_t end_idx = std::min(order.size(), start_idx + cfg.batch_size);
      std::size_t batch = end_idx - start_idx;

      std::vector<Tensor> adv_xs(batch);
      std::vector<int> adv_ys(batch);
      for (std::size_t k = start_idx; k < end_idx; ++k) {
        std::size_t i = order[k];
        adv_xs[k - start_idx] = pgd_example(net, data.xs[i], data.ys[i], pgd);
        adv_ys[k - start_idx] = data.ys[i];
      }

      std::vector<LayerGrads> acc_clean(net.params.size());
      std::vector<LayerGrads> acc_adv(net.params.size());
      for (std::size_t d = 0; d < net.params.size(); ++d) {
        acc_clean[d].weight = Tensor::zeros(net.params[d].weight.shape);
        acc_clean[d].bias = Tensor::zeros(net.params[d].bias.shape);
        acc_adv[d].weight = Tensor::zeros(net.params[d].weight.shape);
        acc_adv[d].bias = Tensor::zeros(net.params[d].bias.shape);
      }

      double loss = accumulate(data.xs, data.ys, start_idx, end_idx, acc_clean,
                               true);
      loss += accumulate(adv_xs, adv_ys, 0, batch, acc_adv, false);
      loss /= static_cast<double>(2 * batch);
      if (!std::isfinite(loss)) {
        throw TrainingDiverged(
            "adversarial_train: non-finite loss at epoch " +
            std::to_string(epoch) + ", batch starting at " +
            std::to_string(start_idx));
      }

      double scale = cfg.learning_rate / static_cast<double>(2 * batch);
      for (std::size_t d = 0; d < net.params.size(); ++d) {
        Tensor& w = net.params[d].weight;
        Tensor& b = net.params[d].bias;
        for (std::size_t j = 0; j < w.size(); ++j) {
          double g = acc_clean[d].weight[j] + acc_adv[d].weight[j];
          w[j] -= scale * g + cfg.learning_rate * cfg.l2_penalty * w[j];
        }
        for (std::size_t j = 0; j < b.size(); ++j) {
          double g = acc_clean[d].bias[j] + acc_adv[d].bias[j];
          b[j] -= scale * g;
        }
      }
    }
  }
  return net;
}

Network extract_model(const LabelApi& api, const MlpArch& arch,
                      const std::vector<Tensor>& xs, const TrainConfig& cfg,
                      std::uint64_t init_seed) {
  if (xs.empty()) throw std::invalid_argument("extract_model: empty query set");
  LabeledDataset queried;
  queried.xs = xs;
  queried.ys.reserve(xs.size());
  for (const Tensor& x : xs) queried.ys.push_back(api.label(x));
  queried.name = "label-queries(" + api.owner_id() + ")";
  Network net = make_mlp(arch, init_seed);
  return train(net, queried, cfg).net;
}

Network extract_model(const ScoreApi& api, const MlpArch& arch,
                      const std::vector<Tensor>& xs, const TrainConfig& cfg,
                      std::uint64_t init_seed) {
  if (xs.empty()) throw std::invalid_argument("extract_model: empty query set");
  std::vector<std::vector<double>> targets;
  targets.reserve(xs.size());
  for (const Tensor& x : xs) targets.push_back(api.probabilities(x));
  Network net = make_mlp(arch, init_seed);
  return train_soft(net, xs, targets, cfg).net;
}

void ZooConfig::validate() const {
  base_train.validate();
  attack_train.validate();
  extract_label_train.validate();
  extract_prob_train.validate();
  if (!(prune_fraction > 0.0 && prune_fraction < 1.0)) {
    throw std::invalid_argument(
        "ZooConfig: prune_fraction must be strictly inside (0, 1)");
  }
  if (hm_overlaps.empty()) {
    throw std::invalid_argument("ZooConfig: hm_overlaps must be nonempty");
  }
  for (double ov : hm_overlaps) {
    if (ov < 0.0 || ov > 1.0) {
      throw std::invalid_argument("ZooConfig: overlap outside [0, 1]");
    }
  }
  if (min_fidelity < 0.0 || min_fidelity > 1.0) {
    throw std::invalid_argument("ZooConfig: min_fidelity outside [0, 1]");
  }
  if (counts.total() == 0) {
    throw std::invalid_argument("ZooConfig: empty member counts");
  }
}

const ModelRecord* Zoo::find(const std::string& model_id) const {
  if (victim.model_id == model_id) return &victim;
  for (const ModelRecord& m : members) {
    if (m.model_id == model_id) return &m;
  }
  return nullptr;
}

namespace {

struct MemberSpec {
  ModelKind kind = ModelKind::HM_SA;
  std::string model_id;
  double overlap = 0.0;  // hm members only
};

std::vector<MemberSpec> plan_members(const ZooConfig& cfg) {
  std::vector<MemberSpec> specs;
  auto add = [&](ModelKind kind, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) {
      MemberSpec s;
      s.kind = kind;
      s.model_id = to_string(kind) + "_" + std::to_string(i);
      if (kind_group(kind) == KindGroup::HM) {
        s.overlap = cfg.hm_overlaps[i % cfg.hm_overlaps.size()];
      }
      specs.push_back(std::move(s));
    }
  };
  add(ModelKind::HM_SA, cfg.counts.hm_sa);
  add(ModelKind::HM_DA, cfg.counts.hm_da);
  add(ModelKind::PM_P, cfg.counts.pm_p);
  add(ModelKind::PM_FL, cfg.counts.pm_fl);
  add(ModelKind::PM_FA, cfg.counts.pm_fa);
  add(ModelKind::PM_ADV, cfg.counts.pm_adv);
  add(ModelKind::EM_SA_L, cfg.counts.em_sa_l);
  add(ModelKind::EM_DA_L, cfg.counts.em_da_l);
  add(ModelKind::EM_SA_PR, cfg.counts.em_sa_pr);
  add(ModelKind::EM_DA_PR, cfg.counts.em_da_pr);
  return specs;
}

}  // namespace

Zoo build_zoo(const LabeledDataset& data, const ZooConfig& cfg) {
  cfg.validate();
  data.validate();
  if (cfg.victim_arch.input_dim != data.dim() ||
      cfg.alt_arch.input_dim != data.dim()) {
    throw DimensionError("build_zoo: architecture input width != data width");
  }
  std::size_t n_classes = static_cast<std::size_t>(data.n_classes());
  if (cfg.victim_arch.n_classes != n_classes ||
      cfg.alt_arch.n_classes != n_classes) {
    throw DimensionError("build_zoo: architecture class count != data labels");
  }

  Zoo zoo;
  zoo.split = split_225(data, 0.0, cfg.seed);

  std::map<double, LabeledDataset> homolog_by_overlap;
  for (const MemberSpec& s : plan_members(cfg)) {
    if (kind_group(s.kind) == KindGroup::HM &&
        !homolog_by_overlap.count(s.overlap)) {
      homolog_by_overlap.emplace(
          s.overlap, split_225(data, s.overlap, cfg.seed).homologous);
    }
  }

  std::uint64_t vseed = derive_seed(cfg.seed, "victim");
  {
    Network init = make_mlp(cfg.victim_arch, derive_seed(vseed, "init"));
    TrainConfig t = cfg.base_train;
    t.seed = derive_seed(vseed, "train");
    TrainResult res = train(init, zoo.split.victim, t);
    zoo.victim.net = std::move(res.net);
    zoo.victim.kind = ModelKind::VICTIM;
    zoo.victim.model_id = "victim";
    zoo.victim.seed = vseed;
    zoo.victim.fidelity = accuracy(zoo.victim.net, zoo.split.victim);
    zoo.victim.objective = "sgd on victim split";
  }
  if (zoo.victim.fidelity < cfg.min_fidelity) {
    throw Error("build_zoo: victim fidelity " +
                format_g(zoo.victim.fidelity) + " below floor " +
                format_g(cfg.min_fidelity));
  }

  std::vector<MemberSpec> specs = plan_members(cfg);
  zoo.members.resize(specs.size());

  auto build_member = [&](std::size_t i) {
    const MemberSpec& spec = specs[i];
    std::uint64_t mseed = derive_seed(cfg.seed, spec.model_id);
    ModelRecord rec;
    rec.kind = spec.kind;
    rec.model_id = spec.model_id;
    rec.seed = mseed;

    switch (kind_group(spec.kind)) {
      case KindGroup::HM: {
        const MlpArch& arch =
            spec.kind == ModelKind::HM_SA ? cfg.victim_arch : cfg.alt_arch;
        Network init = make_mlp(arch, derive_seed(mseed, "init"));
        TrainConfig t = cfg.base_train;
        t.seed = derive_seed(mseed, "train");
        const LabeledDataset& hdata = homolog_by_overlap.at(spec.overlap);
        rec.net = train(init, hdata, t).net;
        rec.fidelity = accuracy(rec.net, hdata);
        rec.objective = "independent sgd, overlap " + format_g(spec.overlap);
        break;
      }
      case KindGroup::PM: {
        TrainConfig t = cfg.attack_train;
        t.seed = derive_seed(mseed, "train");
        switch (spec.kind) {
          case ModelKind::PM_FL:
            rec.net = fine_tune(zoo.victim.net, zoo.split.attacker, t,
                                TuneScope::LAST_LAYER);
            rec.objective = "fine-tune last layer";
            break;
          case ModelKind::PM_FA:
            rec.net =
                fine_tune(zoo.victim.net, zoo.split.attacker, t, TuneScope::ALL);
            rec.objective = "fine-tune all layers";
            break;
          case ModelKind::PM_P:
            rec.net = fine_prune(zoo.victim.net, zoo.split.attacker, t,
                                 cfg.prune_fraction);
            rec.objective = "fine-prune " + format_g(cfg.prune_fraction) +
                            " of last hidden units";
            break;
          default:
            rec.net =
                adversarial_train(zoo.victim.net, zoo.split.attacker, t, cfg.pgd);
            rec.objective = "adversarial fine-tune, pgd eps " +
                            format_g(cfg.pgd.eps);
            break;
        }
        rec.lineage = zoo.victim.model_id;
        rec.fidelity = accuracy(rec.net, zoo.split.attacker);
        break;
      }
      default: {
        const MlpArch& arch =
            (spec.kind == ModelKind::EM_SA_L || spec.kind == ModelKind::EM_SA_PR)
                ? cfg.victim_arch
                : cfg.alt_arch;
        bool label_mode =
            spec.kind == ModelKind::EM_SA_L || spec.kind == ModelKind::EM_DA_L;
        TrainConfig t =
            label_mode ? cfg.extract_label_train : cfg.extract_prob_train;
        t.seed = derive_seed(mseed, "train");
        std::uint64_t init_seed = derive_seed(mseed, "init");
        if (label_mode) {
          LabelApi api(zoo.victim.net, zoo.victim.model_id);
          rec.net = extract_model(api, arch, zoo.split.attacker.xs, t, init_seed);
          rec.objective = "label-query extraction";
        } else {
          ScoreApi api(zoo.victim.net, zoo.victim.model_id);
          rec.net = extract_model(api, arch, zoo.split.attacker.xs, t, init_seed);
          rec.objective = "probability-query extraction";
        }
        rec.lineage = zoo.victim.model_id;
        rec.fidelity = agreement(rec.net, zoo.victim.net, zoo.split.attacker.xs);
        break;
      }
    }

    if (rec.fidelity < cfg.min_fidelity) {
      throw Error("build_zoo: " + rec.model_id + " fidelity " +
                  format_g(rec.fidelity) + " below floor " +
                  format_g(cfg.min_fidelity));
    }
    zoo.members[i] = std::move(rec);
  };

  parallel_for(specs.size(), cfg.threads, build_member);
  return zoo;
}

}  // namespace deepcore
