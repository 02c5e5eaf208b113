#include "deepcore/identify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "deepcore/errors.hpp"
#include "deepcore/random.hpp"

namespace deepcore {

void SuspectTranscript::validate() const {
  if (outputs.empty()) throw Error("transcript " + model_id + ": empty");
  if (labels.size() != outputs.size()) {
    throw DimensionError("transcript " + model_id + ": label/row count mismatch");
  }
  std::size_t width = outputs.front().size();
  if (width == 0) throw DimensionError("transcript " + model_id + ": empty rows");
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    if (outputs[i].size() != width) {
      throw DimensionError("transcript " + model_id + ": ragged rows");
    }
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= width) {
      throw DimensionError("transcript " + model_id + ": label outside row width");
    }
    for (double v : outputs[i]) {
      if (!std::isfinite(v)) {
        throw Error("transcript " + model_id + ": non-finite output");
      }
    }
  }
}

SuspectTranscript query_suspect(const ScoreApi& api, const Fingerprint& fp,
                                bool softmax_rows) {
  if (fp.core_points.empty()) {
    throw std::invalid_argument("query_suspect: empty fingerprint");
  }
  SuspectTranscript t;
  t.model_id = api.owner_id();
  for (const CorePoint& cp : fp.core_points) {
    t.labels.push_back(cp.label);
    std::vector<double> row = api.logits(cp.point);
    if (softmax_rows) row = softmax(std::span<const double>(row));
    t.outputs.push_back(std::move(row));
  }
  t.validate();
  return t;
}

namespace {

void require_comparable(const SuspectTranscript& a, const SuspectTranscript& b) {
  a.validate();
  b.validate();
  if (a.labels != b.labels) {
    throw DimensionError("transcripts " + a.model_id + " and " + b.model_id +
                         " cover different core points");
  }
  if (a.outputs.front().size() != b.outputs.front().size()) {
    throw DimensionError("transcripts " + a.model_id + " and " + b.model_id +
                         " have different output widths");
  }
}

double euclid(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

}  // namespace

double l1_dist(const SuspectTranscript& victim_t,
               const SuspectTranscript& suspect_t) {
  require_comparable(victim_t, suspect_t);
  double acc = 0.0;
  for (std::size_t i = 0; i < victim_t.outputs.size(); ++i) {
    std::size_t label = static_cast<std::size_t>(victim_t.labels[i]);
    acc += std::fabs(victim_t.outputs[i][label] - suspect_t.outputs[i][label]);
  }
  return acc;
}

std::vector<std::vector<double>> cos_matrix(const SuspectTranscript& t) {
  t.validate();
  std::size_t n = t.outputs.size();
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    norms[i] = l2_norm(t.outputs[i]);
    if (norms[i] == 0.0) {
      throw DegenerateGeometry("cos_matrix: transcript " + t.model_id +
                               " has a zero-norm row");
    }
  }
  std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    m[i][i] = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      double c = dot(t.outputs[i], t.outputs[j]) / (norms[i] * norms[j]);
      m[i][j] = c;
      m[j][i] = c;
    }
  }
  return m;
}

double cos_dist(const SuspectTranscript& victim_t,
                const SuspectTranscript& suspect_t) {
  require_comparable(victim_t, suspect_t);
  std::vector<std::vector<double>> a = cos_matrix(victim_t);
  std::vector<std::vector<double>> b = cos_matrix(suspect_t);
  std::size_t n = a.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) acc += std::fabs(a[i][j] - b[i][j]);
  }
  return acc / static_cast<double>(n * n);
}

std::vector<double> flatten_transcript(const SuspectTranscript& t) {
  t.validate();
  std::vector<double> flat;
  flat.reserve(t.outputs.size() * t.outputs.front().size());
  for (const auto& row : t.outputs) {
    flat.insert(flat.end(), row.begin(), row.end());
  }
  return flat;
}

Thresholds calibrate_thresholds(
    const SuspectTranscript& victim_t,
    const std::vector<std::pair<SuspectTranscript, ModelKind>>& population) {
  double max_piracy_l1 = -std::numeric_limits<double>::infinity();
  double min_hm_l1 = std::numeric_limits<double>::infinity();
  double max_piracy_cos = -std::numeric_limits<double>::infinity();
  double min_hm_cos = std::numeric_limits<double>::infinity();
  std::size_t n_hm = 0;
  std::size_t n_piracy = 0;

  for (const auto& [t, kind] : population) {
    if (kind == ModelKind::VICTIM) {
      throw std::invalid_argument(
          "calibrate_thresholds: victim in calibration population");
    }
    double l1 = l1_dist(victim_t, t);
    double cd = cos_dist(victim_t, t);
    if (is_piracy(kind)) {
      ++n_piracy;
      max_piracy_l1 = std::max(max_piracy_l1, l1);
      max_piracy_cos = std::max(max_piracy_cos, cd);
    } else {
      ++n_hm;
      min_hm_l1 = std::min(min_hm_l1, l1);
      min_hm_cos = std::min(min_hm_cos, cd);
    }
  }
  if (n_hm == 0 || n_piracy == 0) {
    throw Error("calibrate_thresholds: need at least one homologous and one "
                "piracy transcript");
  }

  Thresholds th;
  th.d1 = 0.5 * (max_piracy_l1 + min_hm_l1);
  th.d2 = 0.5 * (max_piracy_cos + min_hm_cos);
  th.l1_margin = min_hm_l1 - max_piracy_l1;
  th.cos_margin = min_hm_cos - max_piracy_cos;
  th.l1_overlap = th.l1_margin <= 0.0;
  th.cos_overlap = th.cos_margin <= 0.0;
  return th;
}

std::string to_string(Method m) {
  switch (m) {
    case Method::L1: return "l1";
    case Method::COS: return "cos";
    case Method::CLUSTER: return "cluster";
  }
  throw Error("to_string: bad Method");
}

Method method_from_string(const std::string& s) {
  if (s == "l1") return Method::L1;
  if (s == "cos") return Method::COS;
  if (s == "cluster") return Method::CLUSTER;
  throw ParseError("unknown identification method: " + s);
}

Verdict decide(const SuspectTranscript& victim_t,
               const SuspectTranscript& suspect_t, const Thresholds& th,
               Method method) {
  Verdict v;
  v.model_id = suspect_t.model_id;
  v.method = method;
  switch (method) {
    case Method::L1:
      v.distance = l1_dist(victim_t, suspect_t);
      v.is_piracy = v.distance < th.d1;
      break;
    case Method::COS:
      v.distance = cos_dist(victim_t, suspect_t);
      v.is_piracy = v.distance < th.d2;
      break;
    case Method::CLUSTER:
      throw std::invalid_argument("decide: use classify_suspect for clustering");
  }
  return v;
}

namespace {

void check_population(const std::vector<std::vector<double>>& population,
                      const std::vector<KindGroup>& groups, std::size_t k) {
  if (k < 1) throw std::invalid_argument("clustering: k must be >= 1");
  if (population.size() < k) {
    throw std::invalid_argument("clustering: population smaller than k");
  }
  if (groups.size() != population.size()) {
    throw DimensionError("clustering: group list length != population size");
  }
  std::size_t width = population.front().size();
  if (width == 0) throw DimensionError("clustering: empty feature vectors");
  for (const auto& p : population) {
    if (p.size() != width) {
      throw DimensionError("clustering: ragged feature vectors");
    }
  }
}

std::vector<KindGroup> majority_tags(
    const std::vector<std::vector<double>>& population,
    const std::vector<KindGroup>& groups,
    const std::vector<std::size_t>& assignments, std::size_t k) {
  std::vector<KindGroup> tags(k, KindGroup::HM);
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t counts[4] = {0, 0, 0, 0};
    for (std::size_t i = 0; i < population.size(); ++i) {
      if (assignments[i] == c) ++counts[static_cast<std::size_t>(groups[i])];
    }
    std::size_t best = 0;
    for (std::size_t g = 1; g < 4; ++g) {
      if (counts[g] > counts[best]) best = g;
    }
    tags[c] = static_cast<KindGroup>(best);
  }
  return tags;
}

std::vector<std::size_t> assign_nearest(
    const std::vector<std::vector<double>>& population,
    const std::vector<std::vector<double>>& centers) {
  std::vector<std::size_t> assignments(population.size(), 0);
  for (std::size_t i = 0; i < population.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_c = 0;
    for (std::size_t c = 0; c < centers.size(); ++c) {
      double d = euclid(population[i], centers[c]);
      if (d < best) {
        best = d;
        best_c = c;
      }
    }
    assignments[i] = best_c;
  }
  return assignments;
}

}  // namespace

ClusterModel kmeans(const std::vector<std::vector<double>>& population,
                    const std::vector<KindGroup>& groups, std::size_t k,
                    std::uint64_t seed, std::size_t max_iters) {
  check_population(population, groups, k);
  std::size_t n = population.size();
  Rng rng(derive_seed(seed, "kmeans"));

  // k-means++ seeding: each new center drawn with probability proportional
  // to squared distance from the centers chosen so far.
  std::vector<std::vector<double>> centers;
  centers.push_back(population[rng.index(n)]);
  std::vector<double> d2(n, 0.0);
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double d = euclid(population[i], centers.back());
      double dd = d * d;
      if (centers.size() == 1 || dd < d2[i]) d2[i] = dd;
      total += d2[i];
    }
    std::size_t pick;
    if (total > 0.0) {
      double r = rng.uniform() * total;
      double run = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        run += d2[i];
        if (r < run) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.index(n);
    }
    centers.push_back(population[pick]);
  }

  std::vector<std::size_t> assignments = assign_nearest(population, centers);
  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    // Re-seed any empty cluster to the point farthest from its own center.
    bool reseeded = false;
    for (std::size_t c = 0; c < k; ++c) {
      bool empty = std::find(assignments.begin(), assignments.end(), c) ==
                   assignments.end();
      if (!empty) continue;
      double far = -1.0;
      std::size_t far_i = 0;
      for (std::size_t i = 0; i < n; ++i) {
        double d = euclid(population[i], centers[assignments[i]]);
        if (d > far) {
          far = d;
          far_i = i;
        }
      }
      if (far > 0.0) {
        centers[c] = population[far_i];
        reseeded = true;
      }
    }
    if (reseeded) {
      assignments = assign_nearest(population, centers);
      continue;
    }

    std::vector<std::vector<double>> means(
        k, std::vector<double>(population.front().size(), 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[assignments[i]];
      for (std::size_t j = 0; j < population[i].size(); ++j) {
        means[assignments[i]][j] += population[i][j];
      }
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // handled by the reseed pass next round
      for (double& v : means[c]) v /= static_cast<double>(counts[c]);
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) centers[c] = means[c];
    }

    std::vector<std::size_t> next = assign_nearest(population, centers);
    if (next == assignments) break;
    assignments = std::move(next);
  }

  ClusterModel cm;
  cm.k = k;
  cm.centers = std::move(centers);
  cm.assignments = std::move(assignments);
  cm.tags = majority_tags(population, groups, cm.assignments, k);
  return cm;
}

ClusterModel agglomerative(const std::vector<std::vector<double>>& population,
                           const std::vector<KindGroup>& groups,
                           std::size_t k) {
  check_population(population, groups, k);
  std::size_t n = population.size();

  std::vector<bool> active(n, true);
  std::vector<std::size_t> sizes(n, 1);
  std::vector<std::vector<std::size_t>> members(n);
  for (std::size_t i = 0; i < n; ++i) members[i] = {i};

  std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double d = euclid(population[i], population[j]);
      dist[i][j] = d;
      dist[j][i] = d;
    }
  }

  std::size_t n_active = n;
  while (n_active > k) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0;
    std::size_t bj = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (!active[j]) continue;
        if (dist[i][j] < best) {
          best = dist[i][j];
          bi = i;
          bj = j;
        }
      }
    }
    // Average linkage via the Lance-Williams size-weighted update.
    for (std::size_t c = 0; c < n; ++c) {
      if (!active[c] || c == bi || c == bj) continue;
      double merged = (static_cast<double>(sizes[bi]) * dist[bi][c] +
                       static_cast<double>(sizes[bj]) * dist[bj][c]) /
                      static_cast<double>(sizes[bi] + sizes[bj]);
      dist[bi][c] = merged;
      dist[c][bi] = merged;
    }
    sizes[bi] += sizes[bj];
    members[bi].insert(members[bi].end(), members[bj].begin(),
                       members[bj].end());
    active[bj] = false;
    --n_active;
  }

  ClusterModel cm;
  cm.k = k;
  cm.assignments.resize(n);
  std::size_t width = population.front().size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!active[i]) continue;
    std::size_t cluster_id = cm.centers.size();
    std::vector<double> mean(width, 0.0);
    for (std::size_t m : members[i]) {
      cm.assignments[m] = cluster_id;
      for (std::size_t j = 0; j < width; ++j) mean[j] += population[m][j];
    }
    for (double& v : mean) v /= static_cast<double>(members[i].size());
    cm.centers.push_back(std::move(mean));
  }
  cm.tags = majority_tags(population, groups, cm.assignments, k);
  return cm;
}

Verdict classify_suspect(const ClusterModel& cm,
                         const std::vector<double>& features,
                         const std::string& model_id) {
  if (cm.centers.empty()) {
    throw std::invalid_argument("classify_suspect: unfitted cluster model");
  }
  for (const auto& c : cm.centers) {
    if (c.size() != features.size()) {
      throw DimensionError("classify_suspect: feature width != center width");
    }
  }
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_c = 0;
  for (std::size_t c = 0; c < cm.centers.size(); ++c) {
    double d = euclid(features, cm.centers[c]);
    if (d < best) {
      best = d;
      best_c = c;
    }
  }
  Verdict v;
  v.model_id = model_id;
  v.method = Method::CLUSTER;
  v.distance = best;
  v.cluster = best_c;
  v.is_piracy = cm.tags[best_c] == KindGroup::PM || cm.tags[best_c] == KindGroup::EM;
  return v;
}

}  // namespace deepcore
