#include "deepcore/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

#include "deepcore/errors.hpp"
#include "deepcore/random.hpp"

namespace deepcore {

std::size_t LabeledDataset::dim() const {
  if (xs.empty()) throw DimensionError("LabeledDataset::dim: empty dataset");
  return xs.front().size();
}

int LabeledDataset::n_classes() const {
  int n = 0;
  for (int y : ys) n = std::max(n, y + 1);
  return n;
}

void LabeledDataset::validate() const {
  if (xs.size() != ys.size()) {
    throw DimensionError("LabeledDataset: xs/ys length mismatch");
  }
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!xs.empty() && xs[i].size() != xs.front().size()) {
      throw DimensionError("LabeledDataset: inconsistent sample dimension");
    }
    if (ys[i] < 0) throw Error("LabeledDataset: negative label");
    for (double v : xs[i].data) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw Error("LabeledDataset: sample outside [0,1]");
      }
    }
  }
}

LabeledDataset make_synthetic(std::size_t n_classes, std::size_t dim,
                              std::size_t n_per_class, double spread,
                              std::uint64_t seed) {
  if (n_classes < 2 || dim < 2 || n_per_class == 0 || spread <= 0.0) {
    throw std::invalid_argument(
        "make_synthetic: need n_classes >= 2, dim >= 2, n_per_class >= 1, "
        "spread > 0");
  }

  Rng rng(derive_seed(seed, "synthetic"));
  double margin = std::min(0.3, 1.5 * spread);
  double lo = margin;
  double hi = 1.0 - margin;
  double min_sep = 3.0 * spread;

  // The first mean lands anywhere in the box; each following mean sits
  // 3..4.8 spreads from a randomly chosen earlier one. That keeps every
  // class within a few noise widths of a neighbour, so the task stays
  // nontrivial regardless of how roomy the box is.
  std::vector<std::vector<double>> means;
  std::size_t attempts = 0;
  while (means.size() < n_classes) {
    if (++attempts > 500 * n_classes) {
      throw std::invalid_argument(
          "make_synthetic: cannot place class means with the requested "
          "separation; reduce spread or class count");
    }
    std::vector<double> cand(dim);
    if (means.empty()) {
      for (double& v : cand) v = rng.uniform(lo, hi);
      means.push_back(std::move(cand));
      continue;
    }
    const std::vector<double>& anchor = means[rng.index(means.size())];
    std::vector<double> dir(dim);
    double norm = 0.0;
    for (double& v : dir) {
      v = rng.normal();
      norm += v * v;
    }
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;
    double dist = rng.uniform(1.0, 1.6) * min_sep;
    bool ok = true;
    for (std::size_t i = 0; i < dim; ++i) {
      cand[i] = anchor[i] + dir[i] / norm * dist;
      if (cand[i] < lo || cand[i] > hi) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    for (const auto& m : means) {
      double d2 = 0.0;
      for (std::size_t i = 0; i < dim; ++i) {
        double diff = cand[i] - m[i];
        d2 += diff * diff;
      }
      if (std::sqrt(d2) < min_sep) {
        ok = false;
        break;
      }
    }
    if (ok) means.push_back(std::move(cand));
  }

  LabeledDataset out;
  out.name = "synthetic";
  for (std::size_t c = 0; c < n_classes; ++c) {
    for (std::size_t i = 0; i < n_per_class; ++i) {
      std::vector<double> x(dim);
      for (std::size_t d = 0; d < dim; ++d) {
        x[d] = std::clamp(means[c][d] + spread * rng.normal(), 0.0, 1.0);
      }
      out.xs.push_back(Tensor::from_vector(std::move(x)));
      out.ys.push_back(static_cast<int>(c));
    }
  }
  out.validate();
  return out;
}

namespace {

// Largest-remainder apportionment of `total` across quotas proportional to
// weights; each share stays within +-1 of its exact proportion.
std::vector<std::size_t> apportion(const std::vector<std::size_t>& weights,
                                   std::size_t total) {
  std::size_t wsum = 0;
  for (std::size_t w : weights) wsum += w;
  std::vector<std::size_t> share(weights.size(), 0);
  if (wsum == 0) return share;
  std::vector<std::pair<double, std::size_t>> rema;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    double exact = static_cast<double>(total) * weights[i] / wsum;
    share[i] = std::min(static_cast<std::size_t>(exact), weights[i]);
    assigned += share[i];
    rema.push_back({exact - static_cast<double>(share[i]), i});
  }
  std::sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (const auto& [rem, i] : rema) {
    if (assigned >= total) break;
    if (share[i] < weights[i]) {
      ++share[i];
      ++assigned;
    }
  }
  return share;
}

}  // namespace

SplitPlan split_225(const LabeledDataset& data, double overlap,
                    std::uint64_t seed) {
  data.validate();
  if (!(overlap >= 0.0 && overlap <= 1.0)) {
    throw std::invalid_argument("split_225: overlap must be in [0,1]");
  }
  int n_classes = data.n_classes();
  if (n_classes < 1 || data.size() < 5 * static_cast<std::size_t>(n_classes)) {
    throw Error("split_225: insufficient data (need at least 5 per class)");
  }

  // Per-class pools, shuffled deterministically. The shuffle does not depend
  // on overlap, so the victim/attacker parts are identical across overlaps.
  std::vector<std::vector<std::size_t>> pools(n_classes);
  for (std::size_t i = 0; i < data.size(); ++i) {
    pools[data.ys[i]].push_back(i);
  }
  for (int c = 0; c < n_classes; ++c) {
    Rng rng(derive_seed(seed, "split-class-" + std::to_string(c)));
    rng.shuffle(pools[c]);
  }

  std::vector<std::size_t> n_victim(n_classes), n_attacker(n_classes);
  for (int c = 0; c < n_classes; ++c) {
    std::size_t n = pools[c].size();
    if (n < 5) throw Error("split_225: class " + std::to_string(c) +
                           " has fewer than 5 samples");
    n_victim[c] = 2 * n / 5;
    n_attacker[c] = n / 5;
  }

  std::size_t victim_total = 0;
  for (int c = 0; c < n_classes; ++c) victim_total += n_victim[c];
  std::size_t reuse_total =
      static_cast<std::size_t>(overlap * static_cast<double>(victim_total));
  std::vector<std::size_t> reuse = apportion(n_victim, reuse_total);

  SplitPlan plan;
  plan.overlap = overlap;
  plan.seed = seed;
  plan.victim.name = data.name + "/victim";
  plan.homologous.name = data.name + "/homologous";
  plan.attacker.name = data.name + "/attacker";

  for (int c = 0; c < n_classes; ++c) {
    const auto& pool = pools[c];
    std::size_t nv = n_victim[c];
    std::size_t na = n_attacker[c];
    for (std::size_t i = 0; i < nv; ++i) {
      plan.victim.xs.push_back(data.xs[pool[i]]);
      plan.victim.ys.push_back(c);
    }
    for (std::size_t i = nv; i < nv + na; ++i) {
      plan.attacker.xs.push_back(data.xs[pool[i]]);
      plan.attacker.ys.push_back(c);
    }
    // Homologous: first reuse[c] victim samples, remainder fresh from the
    // reserve after victim and attacker.
    for (std::size_t i = 0; i < reuse[c]; ++i) {
      plan.homologous.xs.push_back(data.xs[pool[i]]);
      plan.homologous.ys.push_back(c);
    }
    std::size_t fresh = nv - reuse[c];
    if (nv + na + fresh > pool.size()) {
      throw Error("split_225: insufficient data for class " +
                  std::to_string(c));
    }
    for (std::size_t i = nv + na; i < nv + na + fresh; ++i) {
      plan.homologous.xs.push_back(data.xs[pool[i]]);
      plan.homologous.ys.push_back(c);
    }
  }
  return plan;
}

double measured_overlap(const LabeledDataset& homologous,
                        const LabeledDataset& victim) {
  if (victim.size() == 0) throw Error("measured_overlap: empty victim set");
  std::map<std::vector<double>, int> counts;
  for (const Tensor& x : victim.xs) counts[x.data]++;
  std::size_t shared = 0;
  for (const Tensor& x : homologous.xs) {
    auto it = counts.find(x.data);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++shared;
    }
  }
  return static_cast<double>(shared) / static_cast<double>(victim.size());
}

LabeledDataset load_cifar10_binary(const std::string& path,
                                   const Cifar10Options& opt) {
  constexpr std::size_t kRecordBytes = 3073;
  constexpr std::size_t kSide = 32;

  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_cifar10_binary: cannot open " + path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());

  if (bytes.size() % kRecordBytes != 0) {
    std::size_t offset = bytes.size() - bytes.size() % kRecordBytes;
    throw ParseError("load_cifar10_binary: " + path + " has length " +
                     std::to_string(bytes.size()) +
                     ", not a multiple of 3073; truncated record at byte " +
                     std::to_string(offset));
  }
  std::size_t stride = std::max<std::size_t>(1, opt.spatial_stride);
  std::size_t kept_side = (kSide + stride - 1) / stride;

  LabeledDataset out;
  out.name = "cifar10";
  std::size_t n_records = bytes.size() / kRecordBytes;
  if (opt.max_records > 0) n_records = std::min(n_records, opt.max_records);
  for (std::size_t r = 0; r < n_records; ++r) {
    const unsigned char* rec =
        reinterpret_cast<const unsigned char*>(&bytes[r * kRecordBytes]);
    if (rec[0] > 9) {
      throw ParseError("load_cifar10_binary: label byte " +
                       std::to_string(int(rec[0])) + " > 9 in record " +
                       std::to_string(r) + " at byte offset " +
                       std::to_string(r * kRecordBytes));
    }
    std::vector<double> x;
    x.reserve(3 * kept_side * kept_side);
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t row = 0; row < kSide; row += stride) {
        for (std::size_t col = 0; col < kSide; col += stride) {
          x.push_back(rec[1 + c * kSide * kSide + row * kSide + col] / 255.0);
        }
      }
    }
    out.xs.push_back(Tensor::from_vector(std::move(x)));
    out.ys.push_back(rec[0]);
  }
  return out;
}

}  // namespace deepcore
