// Acceptance battery for the fingerprinting pipeline. Each criterion prints
// exactly one PASS/FAIL line; the process exits nonzero if any fail.
//
// The heavyweight criteria (3-6, 8) share artifacts from the built-in demo
// experiment: one run feeds the trace, separation, identification, and
// clustering checks, and a second run provides the determinism comparison.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "deepcore/fingerprint.hpp"
#include "deepcore/harness.hpp"
#include "deepcore/identify.hpp"
#include "deepcore/network.hpp"
#include "deepcore/random.hpp"
#include "deepcore/serialize.hpp"
#include "deepcore/zoo.hpp"
#include "test_support.hpp"

namespace dc = deepcore;

namespace {

// Pinned tolerances and budgets.
constexpr double kGradRelErrMax = 1e-6;        // criterion 1
constexpr double kGradSeconds = 10.0;          // criterion 1
constexpr int kGradTrials = 50;                // criterion 1
constexpr double kDeepfoolRelErrMax = 1e-3;    // criterion 2
constexpr double kDeepfoolSeconds = 5.0;       // criterion 2
constexpr std::size_t kDeepfoolItersMax = 2;   // criterion 2
constexpr int kDeepfoolTrials = 20;            // criterion 2
constexpr double kSpearmanMin = 0.8;           // criterion 3
constexpr double kTraceSeconds = 120.0;        // criterion 3
constexpr double kZooSeconds = 600.0;          // criterion 4
constexpr double kCosMirMax = 0.1;             // criterion 5
constexpr double kCosFirMax = 0.1;             // criterion 5
constexpr double kL1MirMax = 0.2;              // criterion 5
constexpr double kL1FirMax = 0.1;              // criterion 5
constexpr double kMetricTol = 1e-12;           // criterion 7
constexpr int kMetricTrials = 100;             // criterion 7

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int g_failures = 0;

void report(int index, const std::string& name, bool pass,
            const std::string& detail) {
  std::printf("%s  %d. %s (%s)\n", pass ? "PASS" : "FAIL", index, name.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

void run_criterion(int index, const std::string& name,
                   const std::function<std::pair<bool, std::string>()>& body) {
  try {
    auto [pass, detail] = body();
    report(index, name, pass, detail);
  } catch (const std::exception& e) {
    report(index, name, false, std::string("exception: ") + e.what());
  }
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

// ---- criterion 1: input gradients vs central finite differences ----

std::pair<bool, std::string> check_gradients() {
  Clock::time_point start = Clock::now();
  dc::Rng rng(20260825);
  double worst = 0.0;
  for (int trial = 0; trial < kGradTrials; ++trial) {
    bool relu = trial % 2 == 0;
    dc::Network net = dc::make_mlp(dctest::random_arch(rng, relu),
                                   rng.next_u64());
    dc::Tensor x = dctest::random_point(rng, net.input_dim());
    // Finite differences are only meaningful away from ReLU kinks.
    while (relu && dctest::relu_kink_clearance(net, x) < 1e-4) {
      x = dctest::random_point(rng, net.input_dim());
    }
    std::size_t comp = rng.index(net.output_dim());
    worst = std::max(worst, dctest::rel_err(dc::grad_input(net, x, comp),
                                            dctest::fd_grad_logit(net, x, comp)));
    std::size_t target = rng.index(net.output_dim());
    worst = std::max(worst,
                     dctest::rel_err(dc::grad_loss_input(net, x, target),
                                     dctest::fd_grad_loss(net, x, target)));
  }
  double elapsed = seconds_since(start);
  bool pass = worst < kGradRelErrMax && elapsed < kGradSeconds;
  return {pass, "max rel err " + fmt(worst) + " over " +
                    std::to_string(kGradTrials) + " nets; " + fmt(elapsed) +
                    " s"};
}

// ---- criterion 2: boundary-distance oracle on linear classifiers ----

std::pair<bool, std::string> check_deepfool() {
  Clock::time_point start = Clock::now();
  dc::Rng rng(424242);
  double worst = 0.0;
  std::size_t worst_iters = 0;
  for (int trial = 0; trial < kDeepfoolTrials; ++trial) {
    std::size_t dim = 4 + rng.index(6);
    std::size_t classes = 3 + rng.index(4);
    std::vector<double> w(dim * classes);
    std::vector<double> b(classes);
    for (double& v : w) v = rng.normal();
    for (double& v : b) v = 0.5 * rng.normal();
    dc::Network net = dctest::linear_net(dim, classes, w, b);
    dc::Tensor x = dctest::random_point(rng, dim);

    // Analytic distance: nearest of the pairwise decision hyperplanes.
    dc::Tensor z = dc::forward(net, x);
    int base = dc::argmax(z.view());
    double exact = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < classes; ++l) {
      if (static_cast<int>(l) == base) continue;
      double wdiff = 0.0;
      for (std::size_t c = 0; c < dim; ++c) {
        double d = net.params[0].weight.at2(l, c) -
                   net.params[0].weight.at2(base, c);
        wdiff += d * d;
      }
      exact = std::min(exact,
                       std::abs(z[l] - z[base]) / std::sqrt(wdiff));
    }

    dc::DeepfoolResult r = dc::deepfool_radius(net, x, 10, 0.0);
    worst = std::max(worst, std::abs(r.radius - exact) / exact);
    worst_iters = std::max(worst_iters, r.iters);
  }
  double elapsed = seconds_since(start);
  bool pass = worst < kDeepfoolRelErrMax && worst_iters <= kDeepfoolItersMax &&
              elapsed < kDeepfoolSeconds;
  return {pass, "max rel err " + fmt(worst) + ", max iters " +
                    std::to_string(worst_iters) + "; " + fmt(elapsed) + " s"};
}

// ---- shared demo artifacts for criteria 3-6 and 8 ----

struct DemoRun {
  dc::ZooReport report;
  dc::FingerprintResult trace;
  dc::SuspectTranscript victim_t;
  std::vector<std::pair<dc::SuspectTranscript, dc::ModelKind>> members;
  double seconds = 0.0;
  std::uint64_t seed = 0;
};

DemoRun run_demo(const std::string& out_dir) {
  dc::ExperimentConfig cfg = dc::ExperimentConfig::demo();
  cfg.out_dir = out_dir;

  DemoRun run;
  Clock::time_point start = Clock::now();
  run.report = dc::run_experiment(cfg);
  run.seconds = seconds_since(start);
  run.seed = cfg.seed;

  run.trace = dc::fingerprint_result_from_json(
      dc::load_json(out_dir + "/fingerprint/trace.json"));
  run.victim_t = dc::transcript_from_json(
      dc::load_json(out_dir + "/transcripts/victim.json"));

  dc::json manifest = dc::load_json(out_dir + "/manifest.json");
  for (const dc::json& m : manifest.at("members")) {
    std::string id = m.at("model_id").get<std::string>();
    dc::ModelKind kind =
        dc::model_kind_from_string(m.at("kind").get<std::string>());
    dc::SuspectTranscript t = dc::transcript_from_json(
        dc::load_json(out_dir + "/transcripts/" + id + ".json"));
    run.members.push_back({std::move(t), kind});
  }
  return run;
}

// ---- criterion 3: score/radius correlation along the optimization ----

std::pair<bool, std::string> check_trace_correlation(const DemoRun& run) {
  double min_rho = 1.0;
  for (const dc::CoreGenResult& r : run.trace.per_label) {
    std::vector<double> scores;
    std::vector<double> radii;
    for (const dc::CoreCheckpoint& c : r.trace) {
      scores.push_back(c.score);
      radii.push_back(c.radius);
    }
    min_rho = std::min(min_rho, dc::spearman(scores, radii));
  }
  bool pass = min_rho >= kSpearmanMin && run.seconds < kTraceSeconds;
  return {pass, "min per-label spearman " + fmt(min_rho) + " over " +
                    std::to_string(run.trace.per_label.size()) +
                    " labels; pipeline " + fmt(run.seconds) + " s"};
}

// ---- criterion 4: population separation and the convergence ablation ----

std::pair<bool, std::string> check_separation(const DemoRun& run) {
  std::map<dc::ModelKind, std::size_t> kind_counts;
  double piracy_sum = 0.0;
  double hm_sum = 0.0;
  std::size_t piracy_n = 0;
  std::size_t hm_n = 0;
  for (const auto& [t, kind] : run.members) {
    ++kind_counts[kind];
    double d = dc::cos_dist(run.victim_t, t);
    if (dc::is_piracy(kind)) {
      piracy_sum += d;
      ++piracy_n;
    } else {
      hm_sum += d;
      ++hm_n;
    }
  }

  bool roster_ok = run.members.size() >= 20 && hm_n >= 6 && piracy_n >= 14;
  for (dc::ModelKind k :
       {dc::ModelKind::HM_SA, dc::ModelKind::HM_DA, dc::ModelKind::PM_P,
        dc::ModelKind::PM_FL, dc::ModelKind::PM_FA, dc::ModelKind::PM_ADV,
        dc::ModelKind::EM_SA_L, dc::ModelKind::EM_DA_L, dc::ModelKind::EM_SA_PR,
        dc::ModelKind::EM_DA_PR}) {
    roster_ok = roster_ok && kind_counts[k] >= 1;
  }

  double mean_piracy = piracy_sum / static_cast<double>(piracy_n);
  double mean_hm = hm_sum / static_cast<double>(hm_n);
  bool separated = mean_piracy < mean_hm;
  bool ablation = run.report.margin_converged > run.report.margin_random;
  bool pass = roster_ok && separated && ablation &&
              run.seconds < kZooSeconds;
  return {pass, "mean matrix distance piracy " + fmt(mean_piracy) + " vs hm " +
                    fmt(mean_hm) + "; margin converged " +
                    fmt(run.report.margin_converged) + " vs random start " +
                    fmt(run.report.margin_random) + "; zoo " +
                    std::to_string(run.members.size()) + " members; " +
                    fmt(run.seconds) + " s"};
}

// ---- criterion 5: identification rates on the held-out half ----

std::pair<bool, std::string> check_identification(const DemoRun& run) {
  const dc::MethodReport* l1 = nullptr;
  const dc::MethodReport* cos = nullptr;
  for (const dc::MethodReport& mr : run.report.methods) {
    if (mr.method == dc::Method::L1) l1 = &mr;
    if (mr.method == dc::Method::COS) cos = &mr;
  }
  if (l1 == nullptr || cos == nullptr) {
    return {false, "missing method report"};
  }
  bool pass = cos->mir <= kCosMirMax && cos->fir <= kCosFirMax &&
              l1->mir <= kL1MirMax && l1->fir <= kL1FirMax;
  return {pass, "cos mir " + fmt(cos->mir) + " fir " + fmt(cos->fir) +
                    "; l1 mir " + fmt(l1->mir) + " fir " + fmt(l1->fir)};
}

// ---- criterion 6: cluster purity over the full zoo ----

std::pair<bool, std::string> check_clustering(const DemoRun& run) {
  std::vector<std::vector<double>> features;
  std::vector<dc::KindGroup> groups;
  for (const auto& [t, kind] : run.members) {
    features.push_back(dc::flatten_transcript(t));
    groups.push_back(dc::kind_group(kind));
  }
  dc::ClusterModel cm = dc::kmeans(features, groups, 3,
                                   dc::derive_seed(run.seed, "cluster"));

  std::size_t hm_in_piracy = 0;
  std::size_t em_total = 0;
  std::size_t em_in_piracy = 0;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    dc::KindGroup tag = cm.tags[cm.assignments[i]];
    bool piracy_cluster = tag == dc::KindGroup::PM || tag == dc::KindGroup::EM;
    if (groups[i] == dc::KindGroup::HM && piracy_cluster) ++hm_in_piracy;
    if (groups[i] == dc::KindGroup::EM) {
      ++em_total;
      if (piracy_cluster) ++em_in_piracy;
    }
  }
  bool pass = hm_in_piracy == 0 && em_in_piracy == em_total;
  return {pass, std::to_string(hm_in_piracy) +
                    " hm in piracy-tagged clusters; " +
                    std::to_string(em_in_piracy) + "/" +
                    std::to_string(em_total) + " em in piracy-tagged clusters"};
}

// ---- criterion 7: metric properties on random transcripts ----

std::pair<bool, std::string> check_metric_properties() {
  dc::Rng rng(777);
  double worst_diag = 0.0;
  double worst_scale = 0.0;
  bool ok = true;
  for (int trial = 0; trial < kMetricTrials; ++trial) {
    std::size_t rows = 2 + rng.index(5);
    std::size_t cols = 2 + rng.index(6);
    dc::SuspectTranscript a =
        dctest::random_transcript(rng, rows, cols, "a");
    dc::SuspectTranscript b =
        dctest::random_transcript(rng, rows, cols, "b");

    ok = ok && dc::l1_dist(a, a) == 0.0 && dc::cos_dist(a, a) == 0.0;
    ok = ok && dc::l1_dist(a, b) >= 0.0 && dc::cos_dist(a, b) >= 0.0;
    ok = ok && dc::l1_dist(a, b) == dc::l1_dist(b, a);
    ok = ok && dc::cos_dist(a, b) == dc::cos_dist(b, a);

    std::vector<std::vector<double>> gram = dc::cos_matrix(a);
    for (std::size_t i = 0; i < rows; ++i) {
      worst_diag = std::max(worst_diag, std::abs(gram[i][i] - 1.0));
    }

    // Scaling each row by its own positive constant must not move the
    // matrix.
    dc::SuspectTranscript scaled = a;
    for (auto& row : scaled.outputs) {
      double c = rng.uniform(0.1, 10.0);
      for (double& v : row) v *= c;
    }
    std::vector<std::vector<double>> gram_scaled = dc::cos_matrix(scaled);
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < rows; ++j) {
        worst_scale =
            std::max(worst_scale, std::abs(gram[i][j] - gram_scaled[i][j]));
      }
    }
  }
  bool pass = ok && worst_diag <= kMetricTol && worst_scale <= kMetricTol;
  return {pass, "diag err " + fmt(worst_diag) + ", scale err " +
                    fmt(worst_scale) + " over " +
                    std::to_string(kMetricTrials) + " transcripts"};
}

// ---- criterion 8: byte-identical verdicts across reruns ----

std::pair<bool, std::string> check_determinism(const std::string& dir_a,
                                               const std::string& dir_b) {
  std::ifstream a(dir_a + "/verdicts.csv", std::ios::binary);
  std::ifstream b(dir_b + "/verdicts.csv", std::ios::binary);
  if (!a.good() || !b.good()) return {false, "verdicts.csv missing"};
  std::ostringstream sa;
  std::ostringstream sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  bool pass = sa.str() == sb.str() && !sa.str().empty();
  return {pass, pass ? "verdicts.csv byte-identical across two runs"
                     : "verdicts.csv differs between runs"};
}

}  // namespace

int main() {
  run_criterion(1, "input gradients match central finite differences",
                check_gradients);
  run_criterion(2, "boundary radius matches the linear-classifier formula",
                check_deepfool);

  dctest::TmpDir tmp("acceptance");
  DemoRun run_a;
  bool demo_ok = true;
  try {
    run_a = run_demo(tmp.file("demo_a"));
  } catch (const std::exception& e) {
    demo_ok = false;
    std::string reason = std::string("demo experiment failed: ") + e.what();
    report(3, "score tracks radius during core-point training", false, reason);
    report(4, "piracy/homologous separation and convergence ablation", false,
           reason);
    report(5, "identification error rates on the held-out half", false,
           reason);
    report(6, "cluster purity over the zoo transcripts", false, reason);
  }
  if (demo_ok) {
    run_criterion(3, "score tracks radius during core-point training",
                  [&] { return check_trace_correlation(run_a); });
    run_criterion(4, "piracy/homologous separation and convergence ablation",
                  [&] { return check_separation(run_a); });
    run_criterion(5, "identification error rates on the held-out half",
                  [&] { return check_identification(run_a); });
    run_criterion(6, "cluster purity over the zoo transcripts",
                  [&] { return check_clustering(run_a); });
  }

  run_criterion(7, "distance metrics behave as pseudometrics",
                check_metric_properties);

  run_criterion(8, "demo reruns produce byte-identical verdicts", [&] {
    dc::ExperimentConfig cfg = dc::ExperimentConfig::demo();
    cfg.out_dir = tmp.file("demo_b");
    dc::run_experiment(cfg);
    return check_determinism(tmp.file("demo_a"), tmp.file("demo_b"));
  });

  if (g_failures > 0) {
    std::printf("%d of 8 criteria failed\n", g_failures);
    return 1;
  }
  std::printf("all 8 criteria passed\n");
  return 0;
}
