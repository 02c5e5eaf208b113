#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "deepcore/dataset.hpp"
#include "deepcore/network.hpp"
#include "deepcore/tensor.hpp"

namespace deepcore {

// A high-confidence input for one label, far from the decision boundary.
struct CorePoint {
  int label = 0;
  Tensor point;
  double radius = 0.0;  // boundary distance at the final checkpoint
  double score = 0.0;   // last-layer logit of the label at the point
  std::size_t epochs_used = 0;
};

struct Fingerprint {
  std::vector<CorePoint> core_points;  // ascending label, at most one each
  std::string victim_id;
};

struct ClipBox {
  double lo = 0.0;
  double hi = 1.0;
};

enum class CoreInit { FROM_DATA, UNIFORM_NOISE };

std::string to_string(CoreInit init);
CoreInit core_init_from_string(const std::string& s);

struct CoreGenConfig {
  double theta = 0.05;  // gradient step size on the core loss
  double gamma = 1e-6;  // stop when the radius moves less than this
  std::size_t outer_max_epochs = 3000;  // total gradient-step budget
  std::size_t burst = 100;              // steps between radius checks
  std::size_t deepfool_max_iters = 60;
  double overshoot = 0.02;
  std::optional<ClipBox> clip;
  CoreInit init = CoreInit::FROM_DATA;
  std::uint64_t seed = 0;

  void validate() const;
};

// -log softmax(f(phi))[label]; minimizing it pushes phi deep into the
// label's region.
double core_loss(const Network& net, const Tensor& phi, int label);

struct DeepfoolResult {
  double radius = 0.0;
  std::size_t iters = 0;
  int final_label = 0;
  bool converged = false;  // false when the iteration cap hit first
};

// Minimal-perturbation boundary distance: walk the iterative linear
// approximation until the predicted label flips, then report the L2 norm of
// the accumulated perturbation.
DeepfoolResult deepfool_radius(const Network& net, const Tensor& x,
                               std::size_t max_iters, double overshoot);

struct CoreCheckpoint {
  std::size_t epoch = 0;  // gradient steps taken so far
  double score = 0.0;
  double radius = 0.0;
  Tensor point;
};

struct CoreGenResult {
  CorePoint core;
  std::vector<CoreCheckpoint> trace;  // entry 0 is the untouched start point
  bool converged = false;
};

// Alternates bursts of gradient descent on the core loss with radius
// checks until the radius settles within gamma or the step budget runs out.
// init_pool supplies start samples for CoreInit::FROM_DATA.
CoreGenResult generate_core_point(const Network& net, int label,
                                  const CoreGenConfig& cfg,
                                  const LabeledDataset* init_pool = nullptr);

struct FingerprintResult {
  Fingerprint fingerprint;
  std::vector<CoreGenResult> per_label;  // index == label, always all labels
};

// One core point per label; top_k > 0 keeps only the k largest-radius
// points (ties prefer the lower label). per_label retains every trace even
// when the fingerprint is reduced.
FingerprintResult generate_fingerprint(const Network& net,
                                       const CoreGenConfig& cfg,
                                       const LabeledDataset* init_pool = nullptr,
                                       std::size_t top_k = 0,
                                       std::size_t threads = 1,
                                       const std::string& victim_id = "victim");

}  // namespace deepcore
