#include "deepcore/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <stdexcept>

#include "deepcore/errors.hpp"
#include "deepcore/random.hpp"

namespace fs = std::filesystem;

namespace deepcore {

namespace {

constexpr const char* kConfigSchema = "deepcore.config/1";
constexpr const char* kManifestSchema = "deepcore.manifest/1";

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename Fn>
auto run_stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const IoError& e) {
    throw IoError(std::string(name) + ": " + e.what());
  } catch (const ParseError& e) {
    throw ParseError(std::string(name) + ": " + e.what());
  } catch (const Error& e) {
    throw Error(std::string(name) + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error(std::string(name) + ": " + e.what());
  }
}

std::ofstream open_text(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  return out;
}

json train_config_to_json(const TrainConfig& t) {
  return json{{"epochs", t.epochs},
              {"learning_rate", t.learning_rate},
              {"batch_size", t.batch_size},
              {"l2_penalty", t.l2_penalty}};
}

void train_config_override(TrainConfig& t, const json& j) {
  t.epochs = j.value("epochs", t.epochs);
  t.learning_rate = j.value("learning_rate", t.learning_rate);
  t.batch_size = j.value("batch_size", t.batch_size);
  t.l2_penalty = j.value("l2_penalty", t.l2_penalty);
}

json arch_to_json(const MlpArch& a) {
  return json{{"input_dim", a.input_dim},
              {"hidden", a.hidden},
              {"n_classes", a.n_classes},
              {"activation", to_string(a.activation)},
              {"arch_id", a.arch_id}};
}

void arch_override(MlpArch& a, const json& j) {
  a.input_dim = j.value("input_dim", a.input_dim);
  if (j.contains("hidden")) a.hidden = j["hidden"].get<std::vector<std::size_t>>();
  a.n_classes = j.value("n_classes", a.n_classes);
  if (j.contains("activation")) {
    a.activation = activation_from_string(j["activation"].get<std::string>());
  }
  a.arch_id = j.value("arch_id", a.arch_id);
}

}  // namespace

ExperimentConfig ExperimentConfig::demo() {
  ExperimentConfig cfg;
  // Width matters here: with hidden layers this size, extraction surrogates
  // track the victim's scores well past the data region, which is what
  // separates them from independently trained models at the core points.
  cfg.zoo.victim_arch = {cfg.dim, {64, 48}, cfg.n_classes, Activation::Relu, ""};
  cfg.zoo.alt_arch = {cfg.dim, {96, 64}, cfg.n_classes, Activation::Relu, ""};
  cfg.zoo.base_train = {.epochs = 80, .learning_rate = 0.08, .batch_size = 16,
                        .seed = 0, .l2_penalty = 1e-4};
  cfg.zoo.attack_train = {.epochs = 4, .learning_rate = 0.006, .batch_size = 16,
                          .seed = 0, .l2_penalty = 0.0};
  // Label queries need enough weight decay to keep the surrogate's score
  // scale near the victim's; probability queries pin the scale by
  // themselves and only need the long schedule.
  cfg.zoo.extract_label_train = {.epochs = 300, .learning_rate = 0.02,
                                 .batch_size = 16, .seed = 0, .l2_penalty = 2e-3};
  cfg.zoo.extract_prob_train = {.epochs = 600, .learning_rate = 0.02,
                                .batch_size = 16, .seed = 0, .l2_penalty = 1e-4};
  cfg.zoo.pgd = {.eps = 0.015, .step = 0.006, .iters = 5};
  cfg.zoo.hm_overlaps = {0.2, 0.1, 0.0};
  // The shallowest core point carries the noisiest geometry; keep the four
  // deepest.
  cfg.top_k = 4;
  return cfg;
}

void ExperimentConfig::validate() const {
  if (!cifar_path) {
    if (n_classes < 2) throw std::invalid_argument("config: n_classes must be >= 2");
    if (dim < 2) throw std::invalid_argument("config: dim must be >= 2");
    if (n_per_class < 5) {
      throw std::invalid_argument("config: n_per_class must be >= 5 for a 2:2:1 split");
    }
    if (!(spread > 0.0)) throw std::invalid_argument("config: spread must be positive");
  }
  zoo.validate();
  coregen.validate();
  if (top_k > zoo.victim_arch.n_classes) {
    throw std::invalid_argument("config: top_k exceeds class count");
  }
  if (cluster_k < 2) throw std::invalid_argument("config: cluster_k must be >= 2");
  if (out_dir.empty()) throw std::invalid_argument("config: out_dir empty");
}

json to_json(const ExperimentConfig& cfg) {
  json data{{"n_classes", cfg.n_classes},
            {"dim", cfg.dim},
            {"n_per_class", cfg.n_per_class},
            {"spread", cfg.spread},
            {"cifar_path", cfg.cifar_path ? json(*cfg.cifar_path) : json(nullptr)},
            {"cifar_max_records", cfg.cifar_max_records},
            {"cifar_stride", cfg.cifar_stride}};
  json counts{{"hm_sa", cfg.zoo.counts.hm_sa},     {"hm_da", cfg.zoo.counts.hm_da},
              {"pm_p", cfg.zoo.counts.pm_p},       {"pm_fl", cfg.zoo.counts.pm_fl},
              {"pm_fa", cfg.zoo.counts.pm_fa},     {"pm_adv", cfg.zoo.counts.pm_adv},
              {"em_sa_l", cfg.zoo.counts.em_sa_l}, {"em_da_l", cfg.zoo.counts.em_da_l},
              {"em_sa_pr", cfg.zoo.counts.em_sa_pr},
              {"em_da_pr", cfg.zoo.counts.em_da_pr}};
  json zoo{{"victim_arch", arch_to_json(cfg.zoo.victim_arch)},
           {"alt_arch", arch_to_json(cfg.zoo.alt_arch)},
           {"base_train", train_config_to_json(cfg.zoo.base_train)},
           {"attack_train", train_config_to_json(cfg.zoo.attack_train)},
           {"extract_label_train", train_config_to_json(cfg.zoo.extract_label_train)},
           {"extract_prob_train", train_config_to_json(cfg.zoo.extract_prob_train)},
           {"prune_fraction", cfg.zoo.prune_fraction},
           {"pgd", json{{"eps", cfg.zoo.pgd.eps},
                        {"step", cfg.zoo.pgd.step},
                        {"iters", cfg.zoo.pgd.iters}}},
           {"hm_overlaps", cfg.zoo.hm_overlaps},
           {"counts", counts},
           {"min_fidelity", cfg.zoo.min_fidelity}};
  json coregen{{"theta", cfg.coregen.theta},
               {"gamma", cfg.coregen.gamma},
               {"outer_max_epochs", cfg.coregen.outer_max_epochs},
               {"burst", cfg.coregen.burst},
               {"deepfool_max_iters", cfg.coregen.deepfool_max_iters},
               {"overshoot", cfg.coregen.overshoot},
               {"clip", cfg.coregen.clip
                            ? json{{"lo", cfg.coregen.clip->lo},
                                   {"hi", cfg.coregen.clip->hi}}
                            : json(nullptr)},
               {"init", to_string(cfg.coregen.init)}};
  return json{{"schema", kConfigSchema},
              {"data", data},
              {"zoo", zoo},
              {"coregen", coregen},
              {"top_k", cfg.top_k},
              {"cluster_k", cfg.cluster_k},
              {"softmax_transcripts", cfg.softmax_transcripts},
              {"seed", cfg.seed},
              {"out_dir", cfg.out_dir},
              {"threads", cfg.threads}};
}

ExperimentConfig experiment_config_from_json(const json& j) {
  require_schema(j, kConfigSchema);
  ExperimentConfig cfg = ExperimentConfig::demo();
  try {
    if (j.contains("data")) {
      const json& d = j["data"];
      cfg.n_classes = d.value("n_classes", cfg.n_classes);
      cfg.dim = d.value("dim", cfg.dim);
      cfg.n_per_class = d.value("n_per_class", cfg.n_per_class);
      cfg.spread = d.value("spread", cfg.spread);
      if (d.contains("cifar_path") && !d["cifar_path"].is_null()) {
        cfg.cifar_path = d["cifar_path"].get<std::string>();
      }
      cfg.cifar_max_records = d.value("cifar_max_records", cfg.cifar_max_records);
      cfg.cifar_stride = d.value("cifar_stride", cfg.cifar_stride);
    }
    // Architectures track the data shape unless the file pins them.
    cfg.zoo.victim_arch.input_dim = cfg.dim;
    cfg.zoo.victim_arch.n_classes = cfg.n_classes;
    cfg.zoo.alt_arch.input_dim = cfg.dim;
    cfg.zoo.alt_arch.n_classes = cfg.n_classes;
    if (j.contains("zoo")) {
      const json& z = j["zoo"];
      if (z.contains("victim_arch")) arch_override(cfg.zoo.victim_arch, z["victim_arch"]);
      if (z.contains("alt_arch")) arch_override(cfg.zoo.alt_arch, z["alt_arch"]);
      if (z.contains("base_train")) train_config_override(cfg.zoo.base_train, z["base_train"]);
      if (z.contains("attack_train")) train_config_override(cfg.zoo.attack_train, z["attack_train"]);
      if (z.contains("extract_label_train")) {
        train_config_override(cfg.zoo.extract_label_train, z["extract_label_train"]);
      }
      if (z.contains("extract_prob_train")) {
        train_config_override(cfg.zoo.extract_prob_train, z["extract_prob_train"]);
      }
      cfg.zoo.prune_fraction = z.value("prune_fraction", cfg.zoo.prune_fraction);
      if (z.contains("pgd")) {
        const json& p = z["pgd"];
        cfg.zoo.pgd.eps = p.value("eps", cfg.zoo.pgd.eps);
        cfg.zoo.pgd.step = p.value("step", cfg.zoo.pgd.step);
        cfg.zoo.pgd.iters = p.value("iters", cfg.zoo.pgd.iters);
      }
      if (z.contains("hm_overlaps")) {
        cfg.zoo.hm_overlaps = z["hm_overlaps"].get<std::vector<double>>();
      }
      if (z.contains("counts")) {
        const json& c = z["counts"];
        ZooCounts& k = cfg.zoo.counts;
        k.hm_sa = c.value("hm_sa", k.hm_sa);
        k.hm_da = c.value("hm_da", k.hm_da);
        k.pm_p = c.value("pm_p", k.pm_p);
        k.pm_fl = c.value("pm_fl", k.pm_fl);
        k.pm_fa = c.value("pm_fa", k.pm_fa);
        k.pm_adv = c.value("pm_adv", k.pm_adv);
        k.em_sa_l = c.value("em_sa_l", k.em_sa_l);
        k.em_da_l = c.value("em_da_l", k.em_da_l);
        k.em_sa_pr = c.value("em_sa_pr", k.em_sa_pr);
        k.em_da_pr = c.value("em_da_pr", k.em_da_pr);
      }
      cfg.zoo.min_fidelity = z.value("min_fidelity", cfg.zoo.min_fidelity);
    }
    if (j.contains("coregen")) {
      const json& c = j["coregen"];
      cfg.coregen.theta = c.value("theta", cfg.coregen.theta);
      cfg.coregen.gamma = c.value("gamma", cfg.coregen.gamma);
      cfg.coregen.outer_max_epochs =
          c.value("outer_max_epochs", cfg.coregen.outer_max_epochs);
      cfg.coregen.burst = c.value("burst", cfg.coregen.burst);
      cfg.coregen.deepfool_max_iters =
          c.value("deepfool_max_iters", cfg.coregen.deepfool_max_iters);
      cfg.coregen.overshoot = c.value("overshoot", cfg.coregen.overshoot);
      if (c.contains("clip")) {
        if (c["clip"].is_null()) {
          cfg.coregen.clip.reset();
        } else {
          cfg.coregen.clip = ClipBox{c["clip"].value("lo", 0.0),
                                     c["clip"].value("hi", 1.0)};
        }
      }
      if (c.contains("init")) {
        cfg.coregen.init = core_init_from_string(c["init"].get<std::string>());
      }
    }
    cfg.top_k = j.value("top_k", cfg.top_k);
    cfg.cluster_k = j.value("cluster_k", cfg.cluster_k);
    cfg.softmax_transcripts = j.value("softmax_transcripts", cfg.softmax_transcripts);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.out_dir = j.value("out_dir", cfg.out_dir);
    cfg.threads = j.value("threads", cfg.threads);
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  return cfg;
}

double compute_mir(const std::vector<std::pair<Verdict, ModelKind>>& verdicts,
                   std::optional<KindGroup> only) {
  std::size_t piracy = 0;
  std::size_t missed = 0;
  for (const auto& [v, kind] : verdicts) {
    if (!is_piracy(kind)) continue;
    if (only && kind_group(kind) != *only) continue;
    ++piracy;
    if (!v.is_piracy) ++missed;
  }
  if (piracy == 0) throw Error("compute_mir: no piracy models in verdict set");
  return static_cast<double>(missed) / static_cast<double>(piracy);
}

double compute_fir(const std::vector<std::pair<Verdict, ModelKind>>& verdicts) {
  std::size_t hm = 0;
  std::size_t flagged = 0;
  for (const auto& [v, kind] : verdicts) {
    if (kind_group(kind) != KindGroup::HM) continue;
    ++hm;
    if (v.is_piracy) ++flagged;
  }
  if (hm == 0) throw Error("compute_fir: no homologous models in verdict set");
  return static_cast<double>(flagged) / static_cast<double>(hm);
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::size_t n = v.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    double avg = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw DimensionError("spearman: length mismatch");
  }
  if (a.size() < 2) {
    throw std::invalid_argument("spearman: need at least two observations");
  }
  std::vector<double> ra = average_ranks(a);
  std::vector<double> rb = average_ranks(b);
  double n = static_cast<double>(a.size());
  double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double cov = 0.0;
  double va = 0.0;
  double vb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double da = ra[i] - ma;
    double db = rb[i] - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va == 0.0 || vb == 0.0) return 0.0;
  return cov / std::sqrt(va * vb);
}

std::vector<InsightGapRow> insight_gap_rows(const FingerprintResult& fpres,
                                            const Zoo& zoo) {
  if (fpres.per_label.empty()) {
    throw std::invalid_argument("insight_gap_rows: missing checkpoint log");
  }
  std::size_t max_cp = 0;
  for (const CoreGenResult& g : fpres.per_label) {
    max_cp = std::max(max_cp, g.trace.size());
  }
  std::size_t n_hm = 0;
  std::size_t n_piracy = 0;
  for (const ModelRecord& m : zoo.members) {
    if (kind_group(m.kind) == KindGroup::HM) ++n_hm;
    if (is_piracy(m.kind)) ++n_piracy;
  }
  if (n_hm == 0 || n_piracy == 0) {
    throw Error("insight_gap_rows: zoo needs homologous and piracy members");
  }

  std::vector<InsightGapRow> rows;
  std::size_t n_labels = fpres.per_label.size();
  for (std::size_t c = 0; c < max_cp; ++c) {
    InsightGapRow row;
    row.checkpoint = c;
    std::vector<const CoreCheckpoint*> cps(n_labels);
    for (std::size_t l = 0; l < n_labels; ++l) {
      const auto& trace = fpres.per_label[l].trace;
      cps[l] = &trace[std::min(c, trace.size() - 1)];
      row.mean_radius += cps[l]->radius;
    }
    row.mean_radius /= static_cast<double>(n_labels);

    std::vector<double> victim_scores(n_labels);
    for (std::size_t l = 0; l < n_labels; ++l) {
      victim_scores[l] = forward(zoo.victim.net, cps[l]->point)[l];
    }
    for (const ModelRecord& m : zoo.members) {
      double diff = 0.0;
      for (std::size_t l = 0; l < n_labels; ++l) {
        double s = forward(m.net, cps[l]->point)[l];
        diff += std::fabs(victim_scores[l] - s);
      }
      diff /= static_cast<double>(n_labels);
      if (kind_group(m.kind) == KindGroup::HM) {
        row.hm_gap += diff;
      } else {
        row.pm_gap += diff;
      }
    }
    row.hm_gap /= static_cast<double>(n_hm);
    row.pm_gap /= static_cast<double>(n_piracy);
    rows.push_back(row);
  }
  return rows;
}

void emit_insight_curves(const FingerprintResult& fpres, const Zoo& zoo,
                         const std::string& dir) {
  if (fpres.per_label.empty()) {
    throw std::invalid_argument("emit_insight_curves: missing checkpoint log");
  }
  fs::create_directories(dir);
  {
    std::ofstream out = open_text(fs::path(dir) / "core_trace.csv");
    out << "label,epoch,score,radius\n";
    for (std::size_t l = 0; l < fpres.per_label.size(); ++l) {
      for (const CoreCheckpoint& c : fpres.per_label[l].trace) {
        out << l << ',' << c.epoch << ',' << fmt17(c.score) << ','
            << fmt17(c.radius) << '\n';
      }
    }
    if (!out.good()) throw IoError("write failed: core_trace.csv");
  }
  {
    std::ofstream out = open_text(fs::path(dir) / "radius_gap.csv");
    out << "checkpoint,mean_radius,hm_gap,pm_gap\n";
    for (const InsightGapRow& r : insight_gap_rows(fpres, zoo)) {
      out << r.checkpoint << ',' << fmt17(r.mean_radius) << ','
          << fmt17(r.hm_gap) << ',' << fmt17(r.pm_gap) << '\n';
    }
    if (!out.good()) throw IoError("write failed: radius_gap.csv");
  }
}

ZooReport run_experiment(const ExperimentConfig& cfg) {
  auto t0 = std::chrono::steady_clock::now();
  cfg.validate();

  LabeledDataset data = run_stage("data", [&] {
    if (cfg.cifar_path) {
      Cifar10Options opt;
      opt.max_records = cfg.cifar_max_records;
      opt.spatial_stride = cfg.cifar_stride;
      return load_cifar10_binary(*cfg.cifar_path, opt);
    }
    return make_synthetic(cfg.n_classes, cfg.dim, cfg.n_per_class, cfg.spread,
                          derive_seed(cfg.seed, "data"));
  });

  Zoo zoo = run_stage("zoo", [&] {
    ZooConfig zcfg = cfg.zoo;
    zcfg.seed = derive_seed(cfg.seed, "zoo");
    zcfg.threads = cfg.threads;
    return build_zoo(data, zcfg);
  });

  FingerprintResult fpres = run_stage("fingerprint", [&] {
    CoreGenConfig ccfg = cfg.coregen;
    ccfg.seed = derive_seed(cfg.seed, "core");
    return generate_fingerprint(zoo.victim.net, ccfg, &zoo.split.victim,
                                cfg.top_k, cfg.threads, zoo.victim.model_id);
  });
  const Fingerprint& fp = fpres.fingerprint;

  ScoreApi victim_api(zoo.victim.net, zoo.victim.model_id);
  SuspectTranscript victim_t;
  std::vector<SuspectTranscript> member_ts(zoo.members.size());
  run_stage("transcripts", [&] {
    victim_t = query_suspect(victim_api, fp, cfg.softmax_transcripts);
    for (std::size_t i = 0; i < zoo.members.size(); ++i) {
      ScoreApi api(zoo.members[i].net, zoo.members[i].model_id);
      member_ts[i] = query_suspect(api, fp, cfg.softmax_transcripts);
    }
  });

  // Alternate members of each kind into calibration and evaluation halves.
  std::vector<std::size_t> cal_idx;
  std::vector<std::size_t> eval_idx;
  {
    std::map<ModelKind, std::size_t> seen;
    for (std::size_t i = 0; i < zoo.members.size(); ++i) {
      std::size_t pos = seen[zoo.members[i].kind]++;
      (pos % 2 == 0 ? cal_idx : eval_idx).push_back(i);
    }
  }

  ZooReport report;
  report.out_dir = cfg.out_dir;
  for (std::size_t i : cal_idx) report.calibration_ids.push_back(zoo.members[i].model_id);
  for (std::size_t i : eval_idx) report.evaluation_ids.push_back(zoo.members[i].model_id);

  report.thresholds = run_stage("calibrate", [&] {
    std::vector<std::pair<SuspectTranscript, ModelKind>> cal_pop;
    for (std::size_t i : cal_idx) {
      cal_pop.emplace_back(member_ts[i], zoo.members[i].kind);
    }
    return calibrate_thresholds(victim_t, cal_pop);
  });

  ClusterModel cm = run_stage("cluster-fit", [&] {
    std::vector<std::vector<double>> features;
    std::vector<KindGroup> groups;
    for (std::size_t i : cal_idx) {
      features.push_back(flatten_transcript(member_ts[i]));
      groups.push_back(kind_group(zoo.members[i].kind));
    }
    return kmeans(features, groups, cfg.cluster_k, derive_seed(cfg.seed, "cluster"));
  });

  run_stage("verdicts", [&] {
    for (std::size_t i : eval_idx) {
      const ModelRecord& m = zoo.members[i];
      report.verdicts.emplace_back(
          decide(victim_t, member_ts[i], report.thresholds, Method::L1), m.kind);
      report.verdicts.emplace_back(
          decide(victim_t, member_ts[i], report.thresholds, Method::COS), m.kind);
      report.verdicts.emplace_back(
          classify_suspect(cm, flatten_transcript(member_ts[i]), m.model_id),
          m.kind);
    }
    for (Method method : {Method::L1, Method::COS, Method::CLUSTER}) {
      std::vector<std::pair<Verdict, ModelKind>> subset;
      for (const auto& vk : report.verdicts) {
        if (vk.first.method == method) subset.push_back(vk);
      }
      MethodReport mr;
      mr.method = method;
      mr.mir = compute_mir(subset);
      mr.fir = compute_fir(subset);
      mr.mir_pm = compute_mir(subset, KindGroup::PM);
      mr.mir_em = compute_mir(subset, KindGroup::EM);
      report.methods.push_back(mr);
    }
    return 0;
  });

  // Margin ablation: rebuild the fingerprint from the raw start points and
  // re-calibrate on the same population.
  run_stage("ablation", [&] {
    Fingerprint fp0;
    fp0.victim_id = fp.victim_id;
    for (const CorePoint& cp : fp.core_points) {
      const CoreCheckpoint& c0 =
          fpres.per_label[static_cast<std::size_t>(cp.label)].trace.front();
      fp0.core_points.push_back(
          {cp.label, c0.point, c0.radius, c0.score, 0});
    }
    SuspectTranscript victim_t0 =
        query_suspect(victim_api, fp0, cfg.softmax_transcripts);
    std::vector<std::pair<SuspectTranscript, ModelKind>> cal_pop0;
    for (std::size_t i : cal_idx) {
      ScoreApi api(zoo.members[i].net, zoo.members[i].model_id);
      cal_pop0.emplace_back(query_suspect(api, fp0, cfg.softmax_transcripts),
                            zoo.members[i].kind);
    }
    Thresholds th0 = calibrate_thresholds(victim_t0, cal_pop0);
    report.margin_converged = report.thresholds.cos_margin;
    report.margin_random = th0.cos_margin;
    return 0;
  });

  run_stage("artifacts", [&] {
    fs::path root(cfg.out_dir);
    fs::create_directories(root / "zoo");
    fs::create_directories(root / "data");
    fs::create_directories(root / "fingerprint");
    fs::create_directories(root / "transcripts");

    save_json(to_json(cfg), (root / "effective_config.json").string());

    save_json(to_json(zoo.victim.net), (root / "zoo" / "victim.json").string());
    json members = json::array();
    for (const ModelRecord& m : zoo.members) {
      std::string rel = "zoo/" + m.model_id + ".json";
      save_json(to_json(m.net), (root / "zoo" / (m.model_id + ".json")).string());
      members.push_back(manifest_entry(m, rel));
    }
    json manifest{{"schema", kManifestSchema},
                  {"data", json{{"name", data.name},
                                {"size", data.size()},
                                {"dim", data.dim()},
                                {"classes", data.n_classes()}}},
                  {"victim", manifest_entry(zoo.victim, "zoo/victim.json")},
                  {"members", members}};
    save_json(manifest, (root / "manifest.json").string());

    save_json(to_json(zoo.split.victim), (root / "data" / "victim_split.json").string());
    save_json(to_json(zoo.split.homologous),
              (root / "data" / "homologous_split.json").string());
    save_json(to_json(zoo.split.attacker),
              (root / "data" / "attacker_split.json").string());

    save_json(to_json(fp), (root / "fingerprint" / "fingerprint.json").string());
    save_json(to_json(fpres), (root / "fingerprint" / "trace.json").string());

    save_json(to_json(victim_t), (root / "transcripts" / "victim.json").string());
    for (std::size_t i = 0; i < zoo.members.size(); ++i) {
      save_json(to_json(member_ts[i]),
                (root / "transcripts" / (zoo.members[i].model_id + ".json")).string());
    }

    save_json(to_json(report.thresholds), (root / "thresholds.json").string());

    {
      std::ofstream out = open_text(root / "verdicts.csv");
      out << "model_id,kind,method,distance,cluster,is_piracy\n";
      std::vector<std::size_t> order(report.verdicts.size());
      std::iota(order.begin(), order.end(), 0);
      auto method_rank = [](Method m) {
        return m == Method::L1 ? 0 : (m == Method::COS ? 1 : 2);
      };
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const Verdict& va = report.verdicts[a].first;
        const Verdict& vb = report.verdicts[b].first;
        if (va.model_id != vb.model_id) return va.model_id < vb.model_id;
        return method_rank(va.method) < method_rank(vb.method);
      });
      for (std::size_t i : order) {
        const auto& [v, kind] = report.verdicts[i];
        out << v.model_id << ',' << to_string(kind) << ',' << to_string(v.method)
            << ',' << fmt17(v.distance) << ',';
        if (v.cluster) out << *v.cluster;
        out << ',' << (v.is_piracy ? 1 : 0) << '\n';
      }
      if (!out.good()) throw IoError("write failed: verdicts.csv");
    }

    emit_insight_curves(fpres, zoo, (root / "curves").string());

    {
      std::ofstream out = open_text(root / "report.txt");
      out << "identification report\n";
      out << "data: " << data.name << ", " << data.size() << " samples, dim "
          << data.dim() << ", " << data.n_classes() << " classes\n";
      out << "zoo: victim + " << zoo.members.size() << " members\n";
      out << "victim fidelity: " << fmt17(zoo.victim.fidelity) << "\n";
      out << "fingerprint: " << fp.core_points.size() << " core points\n";
      for (const CorePoint& cp : fp.core_points) {
        out << "  label " << cp.label << ": radius " << fmt17(cp.radius)
            << ", score " << fmt17(cp.score) << ", epochs " << cp.epochs_used
            << "\n";
      }
      out << "thresholds: d1 " << fmt17(report.thresholds.d1) << " (margin "
          << fmt17(report.thresholds.l1_margin)
          << (report.thresholds.l1_overlap ? ", OVERLAP" : "") << "), d2 "
          << fmt17(report.thresholds.d2) << " (margin "
          << fmt17(report.thresholds.cos_margin)
          << (report.thresholds.cos_overlap ? ", OVERLAP" : "") << ")\n";
      out << "calibration:";
      for (const std::string& id : report.calibration_ids) out << ' ' << id;
      out << "\nevaluation:";
      for (const std::string& id : report.evaluation_ids) out << ' ' << id;
      out << "\n";
      for (const MethodReport& mr : report.methods) {
        out << "method " << to_string(mr.method) << ": mir " << fmt17(mr.mir)
            << ", fir " << fmt17(mr.fir) << ", mir_pm " << fmt17(mr.mir_pm)
            << ", mir_em " << fmt17(mr.mir_em) << "\n";
      }
      out << "ablation cos margin: converged " << fmt17(report.margin_converged)
          << ", random-init " << fmt17(report.margin_random) << "\n";
      if (!out.good()) throw IoError("write failed: report.txt");
    }
    return 0;
  });

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace deepcore
