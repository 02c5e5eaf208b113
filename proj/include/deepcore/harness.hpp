#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "deepcore/fingerprint.hpp"
#include "deepcore/identify.hpp"
#include "deepcore/serialize.hpp"
#include "deepcore/zoo.hpp"

namespace deepcore {

// Full experiment description. The default values are the desk-scale demo:
// a synthetic 5-class victim, a 22-member zoo, and all three identification
// methods. Every random stage derives its stream from `seed`.
struct ExperimentConfig {
  std::size_t n_classes = 5;
  std::size_t dim = 16;
  std::size_t n_per_class = 800;
  double spread = 0.14;

  // When set, replaces the synthetic data with CIFAR-10 binary batches.
  std::optional<std::string> cifar_path;
  std::size_t cifar_max_records = 500;
  std::size_t cifar_stride = 8;

  ZooConfig zoo;
  CoreGenConfig coregen;
  std::size_t top_k = 0;  // 0 keeps every label's core point
  std::size_t cluster_k = 3;
  bool softmax_transcripts = false;

  std::uint64_t seed = 7;
  std::string out_dir = "out";
  std::size_t threads = 1;

  static ExperimentConfig demo();
  void validate() const;
};

json to_json(const ExperimentConfig& cfg);  // deepcore.config/1
// Missing keys fall back to the demo defaults, so partial files work.
ExperimentConfig experiment_config_from_json(const json& j);

struct MethodReport {
  Method method = Method::L1;
  double mir = 0.0;  // missed piracy / all piracy
  double fir = 0.0;  // flagged homologous / all homologous
  double mir_pm = 0.0;
  double mir_em = 0.0;
};

struct ZooReport {
  std::vector<std::pair<Verdict, ModelKind>> verdicts;  // evaluation half
  std::vector<MethodReport> methods;
  Thresholds thresholds;
  // Cosine calibration margin with the converged fingerprint vs the same
  // margin when the raw initial points stand in for core points.
  double margin_converged = 0.0;
  double margin_random = 0.0;
  std::vector<std::string> calibration_ids;
  std::vector<std::string> evaluation_ids;
  double wall_seconds = 0.0;  // not persisted, reports stay reproducible
  std::string out_dir;
};

// Fraction of true piracy models the verdicts fail to flag, optionally
// restricted to one group (PM or EM).
double compute_mir(const std::vector<std::pair<Verdict, ModelKind>>& verdicts,
                   std::optional<KindGroup> only = std::nullopt);

// Fraction of homologous models the verdicts wrongly flag.
double compute_fir(const std::vector<std::pair<Verdict, ModelKind>>& verdicts);

// Spearman rank correlation with average ranks on ties.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

struct InsightGapRow {
  std::size_t checkpoint = 0;  // burst index into the core traces
  double mean_radius = 0.0;
  double hm_gap = 0.0;  // mean |victim - suspect| target-label logit, hm_*
  double pm_gap = 0.0;  // same over pm_* and em_* members
};

// Score-difference gaps per training checkpoint; traces shorter than the
// longest are held at their final point.
std::vector<InsightGapRow> insight_gap_rows(const FingerprintResult& fpres,
                                            const Zoo& zoo);

// curves/core_trace.csv (label, epoch, score, radius) and
// curves/radius_gap.csv (checkpoint, mean_radius, hm_gap, pm_gap).
void emit_insight_curves(const FingerprintResult& fpres, const Zoo& zoo,
                         const std::string& dir);

// Data -> zoo -> fingerprint -> transcripts -> calibration -> verdicts,
// with every artifact written under cfg.out_dir.
ZooReport run_experiment(const ExperimentConfig& cfg);

}  // namespace deepcore
