#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "deepcore/dataset.hpp"
#include "deepcore/network.hpp"
#include "deepcore/train.hpp"

namespace deepcore {

// hm_*: independently trained on homologous data (sa = same architecture as
// the victim, da = different). pm_*: derived from the victim's parameters
// (p = fine-prune, fl = fine-tune last layer, fa = fine-tune all layers,
// adv = adversarial fine-tune). em_*: distilled from victim query responses
// (l = label queries, pr = probability queries).
enum class ModelKind {
  VICTIM,
  HM_SA,
  HM_DA,
  PM_P,
  PM_FL,
  PM_FA,
  PM_ADV,
  EM_SA_L,
  EM_DA_L,
  EM_SA_PR,
  EM_DA_PR,
};

enum class KindGroup { VICTIM, HM, PM, EM };

std::string to_string(ModelKind k);
ModelKind model_kind_from_string(const std::string& s);
std::string to_string(KindGroup g);
KindGroup kind_group(ModelKind k);

// True for stolen models (pm_* and em_*), false for the victim and hm_*.
bool is_piracy(ModelKind k);

struct ModelRecord {
  Network net;
  ModelKind kind = ModelKind::VICTIM;
  std::string model_id;
  std::optional<std::string> lineage;  // victim model_id for pm_*/em_*
  std::uint64_t seed = 0;
  double fidelity = 0.0;  // kind-specific quality score, see build_zoo
  std::string objective;
};

// Query handle that exposes only predicted labels, as a label-only service
// API would. Extraction via this handle never sees scores.
class LabelApi {
 public:
  LabelApi(const Network& net, std::string owner_id);

  int label(const Tensor& x) const;
  std::size_t n_classes() const;
  const std::string& owner_id() const { return owner_id_; }

 private:
  const Network* net_;
  std::string owner_id_;
};

// Query handle that exposes full output scores.
class ScoreApi {
 public:
  ScoreApi(const Network& net, std::string owner_id);

  std::vector<double> logits(const Tensor& x) const;
  std::vector<double> probabilities(const Tensor& x) const;
  int label(const Tensor& x) const;
  std::size_t n_classes() const;
  const std::string& owner_id() const { return owner_id_; }

 private:
  const Network* net_;
  std::string owner_id_;
};

enum class TuneScope { LAST_LAYER, ALL };

// Continues training the given model on new data. cfg.epochs == 0 returns
// an untouched copy.
Network fine_tune(const Network& victim, const LabeledDataset& data,
                  const TrainConfig& cfg, TuneScope scope);

// Unit indices of the last hidden representation, sorted ascending by mean
// absolute activation over xs (ties keep the lower index first).
std::vector<std::size_t> rank_units_by_activation(const Network& net,
                                                  const std::vector<Tensor>& xs);

// Zeroes the outgoing weights of the floor(prune_fraction * width) least
// active hidden units, then fine-tunes with those columns pinned at zero.
Network fine_prune(const Network& victim, const LabeledDataset& data,
                   const TrainConfig& cfg, double prune_fraction);

struct PgdConfig {
  double eps = 0.06;
  double step = 0.02;
  std::size_t iters = 5;
};

// Iterated sign-gradient ascent on the classification loss, clamped to the
// eps box around x intersected with [0, 1].
Tensor pgd_example(const Network& net, const Tensor& x, int label,
                   const PgdConfig& pgd);

// SGD on batches made of the clean samples plus their adversarial versions,
// regenerated against the current model each step. With pgd.iters == 0 the
// adversarial half equals the clean half and the result matches
// fine_tune(..., TuneScope::ALL) exactly.
Network adversarial_train(const Network& victim, const LabeledDataset& data,
                          const TrainConfig& cfg, const PgdConfig& pgd);

// Trains a fresh model of the given architecture to imitate the queried one.
Network extract_model(const LabelApi& api, const MlpArch& arch,
                      const std::vector<Tensor>& xs, const TrainConfig& cfg,
                      std::uint64_t init_seed);
Network extract_model(const ScoreApi& api, const MlpArch& arch,
                      const std::vector<Tensor>& xs, const TrainConfig& cfg,
                      std::uint64_t init_seed);

struct ZooCounts {
  std::size_t hm_sa = 3;
  std::size_t hm_da = 3;
  std::size_t pm_p = 2;
  std::size_t pm_fl = 2;
  std::size_t pm_fa = 2;
  std::size_t pm_adv = 2;
  std::size_t em_sa_l = 2;
  std::size_t em_da_l = 2;
  std::size_t em_sa_pr = 2;
  std::size_t em_da_pr = 2;

  std::size_t homologous() const { return hm_sa + hm_da; }
  std::size_t piracy() const {
    return pm_p + pm_fl + pm_fa + pm_adv + em_sa_l + em_da_l + em_sa_pr +
           em_da_pr;
  }
  std::size_t total() const { return homologous() + piracy(); }
};

struct ZooConfig {
  MlpArch victim_arch;
  MlpArch alt_arch;
  TrainConfig base_train;           // victim and hm_* members
  TrainConfig attack_train;         // pm_* members
  TrainConfig extract_label_train;  // em_*_l members
  TrainConfig extract_prob_train;   // em_*_pr members
  double prune_fraction = 0.25;
  PgdConfig pgd;
  // Training-data overlap fractions cycled across hm members of each kind.
  std::vector<double> hm_overlaps = {1.0, 0.5, 0.0};
  ZooCounts counts;
  double min_fidelity = 0.85;
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  void validate() const;
};

struct Zoo {
  // Victim and attacker parts are shared by every member; hm members train
  // on their own overlap-specific homologous splits.
  SplitPlan split;
  ModelRecord victim;
  std::vector<ModelRecord> members;

  const ModelRecord* find(const std::string& model_id) const;
};

// Trains the victim plus cfg.counts imitation and attack models. Every
// member whose fidelity lands below cfg.min_fidelity aborts the build.
Zoo build_zoo(const LabeledDataset& data, const ZooConfig& cfg);

}  // namespace deepcore
