#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "deepcore/tensor.hpp"

namespace deepcore {

// Samples in [0,1]^M with integer class labels.
struct LabeledDataset {
  std::vector<Tensor> xs;
  std::vector<int> ys;
  std::string name;

  std::size_t size() const { return xs.size(); }
  std::size_t dim() const;
  int n_classes() const;  // max label + 1
  void validate() const;
};

// Victim/homologous/attacker partition of one source dataset. The victim and
// attacker parts depend only on the seed; the homologous part additionally
// depends on the requested overlap, so sweeping overlap keeps the victim
// fixed.
struct SplitPlan {
  LabeledDataset victim;
  LabeledDataset homologous;
  LabeledDataset attacker;
  double overlap = 0.0;
  std::uint64_t seed = 0;
};

// Class-balanced Gaussian mixture clipped to [0,1]^dim. Class means are
// placed with pairwise separation >= 4*spread.
LabeledDataset make_synthetic(std::size_t n_classes, std::size_t dim,
                              std::size_t n_per_class, double spread,
                              std::uint64_t seed);

// 2:2:1 victim/homologous/attacker split, class-stratified. The homologous
// set reuses floor(overlap * |victim|) victim samples and fills the rest
// from the leftover pool.
SplitPlan split_225(const LabeledDataset& data, double overlap,
                    std::uint64_t seed);

// |homologous \cap victim| / |victim|, samples compared by value.
double measured_overlap(const LabeledDataset& homologous,
                        const LabeledDataset& victim);

struct Cifar10Options {
  std::size_t max_records = 0;    // 0 = all
  std::size_t spatial_stride = 1; // keep pixels whose row and col are multiples
};

// Standard binary layout: 3073-byte records, 1 label byte then 3x1024 pixel
// bytes row-major; pixels scaled to [0,1].
LabeledDataset load_cifar10_binary(const std::string& path,
                                   const Cifar10Options& opt = {});

}  // namespace deepcore
