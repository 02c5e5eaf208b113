#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "deepcore/fingerprint.hpp"
#include "deepcore/zoo.hpp"

namespace deepcore {

// One model's responses to a fingerprint: row i is the full output vector
// on core point i, in the fingerprint's label order.
struct SuspectTranscript {
  std::string model_id;
  std::vector<int> labels;
  std::vector<std::vector<double>> outputs;

  void validate() const;
};

// softmax_rows converts each logit row to probabilities; identification
// defaults to raw logits.
SuspectTranscript query_suspect(const ScoreApi& api, const Fingerprint& fp,
                                bool softmax_rows = false);

// Sum over core points of |victim - suspect| at the point's own label.
double l1_dist(const SuspectTranscript& victim_t,
               const SuspectTranscript& suspect_t);

// Pairwise cosine similarity between output rows.
std::vector<std::vector<double>> cos_matrix(const SuspectTranscript& t);

// Entrywise L1 difference of the two cosine matrices, averaged over all
// matrix cells.
double cos_dist(const SuspectTranscript& victim_t,
                const SuspectTranscript& suspect_t);

// Concatenated output rows; the feature vector clustering runs on.
std::vector<double> flatten_transcript(const SuspectTranscript& t);

struct Thresholds {
  double d1 = 0.0;  // piracy when l1_dist strictly below
  double d2 = 0.0;  // piracy when cos_dist strictly below
  // Smallest homologous distance minus largest piracy distance; the
  // populations overlap when this is not positive.
  double l1_margin = 0.0;
  double cos_margin = 0.0;
  bool l1_overlap = false;
  bool cos_overlap = false;
};

// Midpoint rule per metric: halfway between the largest piracy distance and
// the smallest homologous distance to the victim.
Thresholds calibrate_thresholds(
    const SuspectTranscript& victim_t,
    const std::vector<std::pair<SuspectTranscript, ModelKind>>& population);

enum class Method { L1, COS, CLUSTER };

std::string to_string(Method m);
Method method_from_string(const std::string& s);

struct Verdict {
  std::string model_id;
  Method method = Method::L1;
  double distance = 0.0;  // metric value, or distance to the chosen center
  std::optional<std::size_t> cluster;
  bool is_piracy = false;
};

// Threshold decision for Method::L1 or Method::COS (strict inequality).
Verdict decide(const SuspectTranscript& victim_t,
               const SuspectTranscript& suspect_t, const Thresholds& th,
               Method method);

struct ClusterModel {
  std::size_t k = 0;
  std::vector<std::vector<double>> centers;
  std::vector<KindGroup> tags;  // majority member group per center
  std::vector<std::size_t> assignments;
};

// Lloyd iterations with k-means++ seeding. Empty clusters re-seed to the
// point farthest from its current center. Ties always resolve to the lowest
// index, so a fixed seed reproduces the model exactly.
ClusterModel kmeans(const std::vector<std::vector<double>>& population,
                    const std::vector<KindGroup>& groups, std::size_t k,
                    std::uint64_t seed, std::size_t max_iters = 100);

// Bottom-up average-linkage merging until k clusters remain; the
// lowest-index pair merges first on ties, so no seed is needed.
ClusterModel agglomerative(const std::vector<std::vector<double>>& population,
                           const std::vector<KindGroup>& groups, std::size_t k);

// Nearest center by Euclidean distance; piracy when that center's tag is a
// stolen-model group.
Verdict classify_suspect(const ClusterModel& cm,
                         const std::vector<double>& features,
                         const std::string& model_id);

}  // namespace deepcore
