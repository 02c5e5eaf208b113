#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "deepcore/errors.hpp"
#include "deepcore/harness.hpp"
#include "deepcore/random.hpp"

namespace fs = std::filesystem;
namespace dc = deepcore;

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> top_k;
  std::optional<std::string> out;
  std::optional<std::size_t> threads;
};

dc::ExperimentConfig resolve_config(const std::string& spec, const Overrides& o) {
  dc::ExperimentConfig cfg = spec == "demo"
                                 ? dc::ExperimentConfig::demo()
                                 : dc::experiment_config_from_json(dc::load_json(spec));
  if (o.seed) cfg.seed = *o.seed;
  if (o.top_k) cfg.top_k = *o.top_k;
  if (o.threads) cfg.threads = *o.threads;
  if (o.out) {
    cfg.out_dir = *o.out;
  } else if (const char* env = std::getenv("DEEPCORE_OUT")) {
    cfg.out_dir = env;
  }
  return cfg;
}

dc::LabeledDataset make_data(const dc::ExperimentConfig& cfg) {
  if (cfg.cifar_path) {
    dc::Cifar10Options opt;
    opt.max_records = cfg.cifar_max_records;
    opt.spatial_stride = cfg.cifar_stride;
    return dc::load_cifar10_binary(*cfg.cifar_path, opt);
  }
  return dc::make_synthetic(cfg.n_classes, cfg.dim, cfg.n_per_class, cfg.spread,
                            dc::derive_seed(cfg.seed, "data"));
}

// Same seed derivations as run_experiment, so a standalone stage reproduces
// the artifacts the full pipeline would write.
dc::Zoo make_zoo(const dc::LabeledDataset& data, const dc::ExperimentConfig& cfg) {
  dc::ZooConfig zcfg = cfg.zoo;
  zcfg.seed = dc::derive_seed(cfg.seed, "zoo");
  zcfg.threads = cfg.threads;
  return dc::build_zoo(data, zcfg);
}

dc::FingerprintResult make_fingerprint(const dc::Zoo& zoo,
                                       const dc::ExperimentConfig& cfg) {
  dc::CoreGenConfig ccfg = cfg.coregen;
  ccfg.seed = dc::derive_seed(cfg.seed, "core");
  return dc::generate_fingerprint(zoo.victim.net, ccfg, &zoo.split.victim,
                                  cfg.top_k, cfg.threads, zoo.victim.model_id);
}

void write_zoo_artifacts(const dc::LabeledDataset& data, const dc::Zoo& zoo,
                         const dc::ExperimentConfig& cfg) {
  fs::path root(cfg.out_dir);
  fs::create_directories(root / "zoo");
  fs::create_directories(root / "data");
  dc::save_json(dc::to_json(cfg), (root / "effective_config.json").string());
  dc::save_json(dc::to_json(zoo.victim.net), (root / "zoo" / "victim.json").string());
  dc::json members = dc::json::array();
  for (const dc::ModelRecord& m : zoo.members) {
    std::string rel = "zoo/" + m.model_id + ".json";
    dc::save_json(dc::to_json(m.net), (root / rel).string());
    members.push_back(dc::manifest_entry(m, rel));
  }
  dc::json manifest{{"schema", "deepcore.manifest/1"},
                    {"data", dc::json{{"name", data.name},
                                      {"size", data.size()},
                                      {"dim", data.dim()},
                                      {"classes", data.n_classes()}}},
                    {"victim", dc::manifest_entry(zoo.victim, "zoo/victim.json")},
                    {"members", members}};
  dc::save_json(manifest, (root / "manifest.json").string());
  dc::save_json(dc::to_json(zoo.split.victim),
                (root / "data" / "victim_split.json").string());
  dc::save_json(dc::to_json(zoo.split.homologous),
                (root / "data" / "homologous_split.json").string());
  dc::save_json(dc::to_json(zoo.split.attacker),
                (root / "data" / "attacker_split.json").string());
}

int cmd_train_zoo(const dc::ExperimentConfig& cfg) {
  dc::LabeledDataset data = make_data(cfg);
  dc::Zoo zoo = make_zoo(data, cfg);
  write_zoo_artifacts(data, zoo, cfg);
  std::printf("zoo: victim + %zu members -> %s\n", zoo.members.size(),
              cfg.out_dir.c_str());
  return 0;
}

int cmd_fingerprint(const dc::ExperimentConfig& cfg) {
  dc::LabeledDataset data = make_data(cfg);
  dc::Zoo zoo = make_zoo(data, cfg);
  dc::FingerprintResult fpres = make_fingerprint(zoo, cfg);
  fs::path root(cfg.out_dir);
  fs::create_directories(root / "fingerprint");
  dc::save_json(dc::to_json(cfg), (root / "effective_config.json").string());
  dc::save_json(dc::to_json(fpres.fingerprint),
                (root / "fingerprint" / "fingerprint.json").string());
  dc::save_json(dc::to_json(fpres), (root / "fingerprint" / "trace.json").string());
  std::printf("fingerprint: %zu core points -> %s\n",
              fpres.fingerprint.core_points.size(),
              (root / "fingerprint").string().c_str());
  return 0;
}

int cmd_insight_curves(const dc::ExperimentConfig& cfg) {
  dc::LabeledDataset data = make_data(cfg);
  dc::Zoo zoo = make_zoo(data, cfg);
  dc::FingerprintResult fpres = make_fingerprint(zoo, cfg);
  fs::path root(cfg.out_dir);
  fs::create_directories(root);
  dc::save_json(dc::to_json(cfg), (root / "effective_config.json").string());
  dc::emit_insight_curves(fpres, zoo, (root / "curves").string());
  std::printf("curves -> %s\n", (root / "curves").string().c_str());
  return 0;
}

int cmd_evaluate(const dc::ExperimentConfig& cfg) {
  dc::ZooReport report = dc::run_experiment(cfg);
  for (const dc::MethodReport& mr : report.methods) {
    std::printf("method %s: mir %.4f fir %.4f (pm %.4f, em %.4f)\n",
                dc::to_string(mr.method).c_str(), mr.mir, mr.fir, mr.mir_pm,
                mr.mir_em);
  }
  std::printf("report -> %s\n", report.out_dir.c_str());
  return 0;
}

// A suspect (or victim) file may hold either a serialized network, which gets
// queried at the fingerprint points, or a previously recorded transcript.
dc::SuspectTranscript load_transcript(const std::string& path,
                                      const dc::Fingerprint& fp) {
  dc::json j = dc::load_json(path);
  std::string schema = j.is_object() ? j.value("schema", "") : "";
  if (schema == "deepcore.transcript/1") return dc::transcript_from_json(j);
  if (schema == "deepcore.network/1") {
    dc::Network net = dc::network_from_json(j);
    dc::ScoreApi api(net, fs::path(path).stem().string());
    return dc::query_suspect(api, fp, false);
  }
  throw dc::ParseError("expected a network or transcript file: " + path);
}

int cmd_identify(const std::string& fp_path, const std::string& victim_path,
                 const std::string& suspect_path, const std::string& th_path,
                 std::optional<double> d1, std::optional<double> d2,
                 const std::string& method_name) {
  dc::Fingerprint fp = dc::fingerprint_from_json(dc::load_json(fp_path));
  dc::SuspectTranscript victim_t = load_transcript(victim_path, fp);
  dc::SuspectTranscript suspect_t = load_transcript(suspect_path, fp);

  dc::Thresholds th;
  if (!th_path.empty()) {
    th = dc::thresholds_from_json(dc::load_json(th_path));
  } else if (d1 && d2) {
    th.d1 = *d1;
    th.d2 = *d2;
  } else {
    throw std::invalid_argument(
        "identify needs --thresholds FILE or both --d1 and --d2");
  }

  dc::Method method = dc::method_from_string(method_name);
  dc::Verdict v = dc::decide(victim_t, suspect_t, th, method);
  std::printf("verdict %s method=%s distance=%.17g piracy=%d\n",
              v.model_id.c_str(), dc::to_string(v.method).c_str(), v.distance,
              v.is_piracy ? 1 : 0);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deepcore: victim fingerprinting and pirated-model identification"};
  app.require_subcommand(1);

  std::string config_spec = "demo";
  Overrides ov;
  auto add_common = [&](CLI::App* sc) {
    sc->add_option("--config", config_spec,
                   "Config file, or 'demo' for built-in defaults");
    sc->add_option("--seed", ov.seed, "Experiment seed override");
    sc->add_option("--out", ov.out,
                   "Output directory (default: config value or $DEEPCORE_OUT)");
    sc->add_option("--threads", ov.threads, "Worker thread count override");
  };

  CLI::App* sc_zoo = app.add_subcommand("train-zoo", "Train the victim and model zoo");
  add_common(sc_zoo);

  CLI::App* sc_fp =
      app.add_subcommand("fingerprint", "Generate the victim fingerprint");
  add_common(sc_fp);
  sc_fp->add_option("--top-k", ov.top_k, "Keep only the k largest-radius points");

  CLI::App* sc_eval =
      app.add_subcommand("evaluate", "Run the full pipeline and write the report");
  add_common(sc_eval);
  sc_eval->add_option("--top-k", ov.top_k, "Keep only the k largest-radius points");

  CLI::App* sc_curves =
      app.add_subcommand("insight-curves", "Write score/radius trace CSVs");
  add_common(sc_curves);

  CLI::App* sc_id =
      app.add_subcommand("identify", "Compare one suspect against a fingerprint");
  std::string fp_path;
  std::string victim_path;
  std::string suspect_path;
  std::string th_path;
  std::optional<double> d1;
  std::optional<double> d2;
  std::string method_name = "cos";
  sc_id->add_option("--fingerprint", fp_path, "Victim fingerprint file")->required();
  sc_id->add_option("--victim", victim_path, "Victim network or transcript file")
      ->required();
  sc_id->add_option("--suspect", suspect_path, "Suspect network or transcript file")
      ->required();
  sc_id->add_option("--thresholds", th_path, "Calibrated thresholds file");
  sc_id->add_option("--d1", d1, "Pointwise distance threshold");
  sc_id->add_option("--d2", d2, "Matrix distance threshold");
  sc_id->add_option("--method", method_name,
                    "l1 or cos (clustering needs a fitted population; see "
                    "evaluate)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "error: " << e.what() << "\n\n" << app.help() << std::flush;
    return 2;
  }

  try {
    if (sc_id->parsed()) {
      return cmd_identify(fp_path, victim_path, suspect_path, th_path, d1, d2,
                          method_name);
    }
    dc::ExperimentConfig cfg = resolve_config(config_spec, ov);
    if (sc_zoo->parsed()) return cmd_train_zoo(cfg);
    if (sc_fp->parsed()) return cmd_fingerprint(cfg);
    if (sc_eval->parsed()) return cmd_evaluate(cfg);
    if (sc_curves->parsed()) return cmd_insight_curves(cfg);
    std::cerr << app.help() << std::flush;
    return 2;
  } catch (const dc::ParseError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 4;
  } catch (const dc::IoError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
}
