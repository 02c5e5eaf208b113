#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace deepcore {

// Deterministic generator with self-contained draw helpers. Draws do not go
// through std distributions, so sequences are stable across standard
// libraries and identical runs reproduce bit for bit.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();

  // Uniform in [0, 1) with 53 random mantissa bits.
  double uniform();
  double uniform(double lo, double hi);

  // Standard normal via Box-Muller; caches the spare deviate.
  double normal();

  // Uniform index in [0, n); n must be positive. Rejection sampling, no
  // modulo bias.
  std::size_t index(std::size_t n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Independent deterministic stream per (base seed, stage tag). Every stage of
// the pipeline derives its own seed from the experiment seed this way.
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag);

}  // namespace deepcore
