#include "deepcore/serialize.hpp"

#include <fstream>

#include "deepcore/errors.hpp"

namespace deepcore {

namespace {

constexpr const char* kNetworkSchema = "deepcore.network/1";
constexpr const char* kDatasetSchema = "deepcore.dataset/1";
constexpr const char* kFingerprintSchema = "deepcore.fingerprint/1";
constexpr const char* kTraceSchema = "deepcore.trace/1";
constexpr const char* kTranscriptSchema = "deepcore.transcript/1";
constexpr const char* kThresholdsSchema = "deepcore.thresholds/1";

// json exceptions (missing key, wrong type) become ParseErrors naming the
// artifact kind.
template <typename Fn>
auto parse_guard(const char* what, Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw ParseError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

void require_schema(const json& j, const std::string& expected) {
  if (!j.is_object() || !j.contains("schema") || !j["schema"].is_string()) {
    throw ParseError("artifact missing schema tag (expected " + expected + ")");
  }
  std::string got = j["schema"].get<std::string>();
  if (got != expected) {
    throw ParseError("schema mismatch: expected " + expected + ", got " + got);
  }
}

json to_json(const Tensor& t) {
  return json{{"shape", t.shape}, {"data", t.data}};
}

Tensor tensor_from_json(const json& j) {
  return parse_guard("tensor", [&] {
    return Tensor(j.at("shape").get<std::vector<std::size_t>>(),
                  j.at("data").get<std::vector<double>>());
  });
}

json to_json(const Network& net) {
  json layers = json::array();
  for (const LayerSpec& l : net.layers) {
    if (l.kind == LayerSpec::Kind::Dense) {
      layers.push_back({{"kind", "dense"}, {"in", l.in_dim}, {"out", l.out_dim}});
    } else {
      layers.push_back({{"kind", to_string(l.activation)}, {"dim", l.in_dim}});
    }
  }
  json params = json::array();
  for (const DenseParams& p : net.params) {
    params.push_back({{"weight", to_json(p.weight)}, {"bias", to_json(p.bias)}});
  }
  return json{{"schema", kNetworkSchema},
              {"arch_id", net.arch_id},
              {"layers", layers},
              {"params", params}};
}

Network network_from_json(const json& j) {
  require_schema(j, kNetworkSchema);
  Network net = parse_guard("network", [&] {
    Network out;
    out.arch_id = j.at("arch_id").get<std::string>();
    for (const json& l : j.at("layers")) {
      std::string kind = l.at("kind").get<std::string>();
      if (kind == "dense") {
        out.layers.push_back(LayerSpec::dense(l.at("in").get<std::size_t>(),
                                              l.at("out").get<std::size_t>()));
      } else {
        out.layers.push_back(LayerSpec::activation_layer(
            activation_from_string(kind), l.at("dim").get<std::size_t>()));
      }
    }
    for (const json& p : j.at("params")) {
      out.params.push_back(DenseParams{tensor_from_json(p.at("weight")),
                                       tensor_from_json(p.at("bias"))});
    }
    return out;
  });
  net.validate();
  return net;
}

json to_json(const LabeledDataset& data) {
  json xs = json::array();
  for (const Tensor& x : data.xs) xs.push_back(x.data);
  return json{{"schema", kDatasetSchema},
              {"name", data.name},
              {"xs", xs},
              {"ys", data.ys}};
}

LabeledDataset dataset_from_json(const json& j) {
  require_schema(j, kDatasetSchema);
  LabeledDataset data = parse_guard("dataset", [&] {
    LabeledDataset out;
    out.name = j.at("name").get<std::string>();
    for (const json& row : j.at("xs")) {
      out.xs.push_back(Tensor::from_vector(row.get<std::vector<double>>()));
    }
    out.ys = j.at("ys").get<std::vector<int>>();
    return out;
  });
  data.validate();
  return data;
}

namespace {

json core_point_to_json(const CorePoint& cp) {
  return json{{"label", cp.label},
              {"point", cp.point.data},
              {"radius", cp.radius},
              {"score", cp.score},
              {"epochs_used", cp.epochs_used}};
}

CorePoint core_point_from_json(const json& j) {
  CorePoint cp;
  cp.label = j.at("label").get<int>();
  cp.point = Tensor::from_vector(j.at("point").get<std::vector<double>>());
  cp.radius = j.at("radius").get<double>();
  cp.score = j.at("score").get<double>();
  cp.epochs_used = j.at("epochs_used").get<std::size_t>();
  return cp;
}

}  // namespace

json to_json(const Fingerprint& fp) {
  json points = json::array();
  for (const CorePoint& cp : fp.core_points) points.push_back(core_point_to_json(cp));
  return json{{"schema", kFingerprintSchema},
              {"victim_id", fp.victim_id},
              {"core_points", points}};
}

Fingerprint fingerprint_from_json(const json& j) {
  require_schema(j, kFingerprintSchema);
  return parse_guard("fingerprint", [&] {
    Fingerprint fp;
    fp.victim_id = j.at("victim_id").get<std::string>();
    for (const json& p : j.at("core_points")) {
      fp.core_points.push_back(core_point_from_json(p));
    }
    return fp;
  });
}

json to_json(const CoreGenResult& r) {
  json checkpoints = json::array();
  for (const CoreCheckpoint& c : r.trace) {
    checkpoints.push_back({{"epoch", c.epoch},
                           {"score", c.score},
                           {"radius", c.radius},
                           {"point", c.point.data}});
  }
  return json{{"core", core_point_to_json(r.core)},
              {"converged", r.converged},
              {"checkpoints", checkpoints}};
}

CoreGenResult core_gen_result_from_json(const json& j) {
  return parse_guard("core trace", [&] {
    CoreGenResult r;
    r.core = core_point_from_json(j.at("core"));
    r.converged = j.at("converged").get<bool>();
    for (const json& c : j.at("checkpoints")) {
      CoreCheckpoint cp;
      cp.epoch = c.at("epoch").get<std::size_t>();
      cp.score = c.at("score").get<double>();
      cp.radius = c.at("radius").get<double>();
      cp.point = Tensor::from_vector(c.at("point").get<std::vector<double>>());
      r.trace.push_back(std::move(cp));
    }
    return r;
  });
}

json to_json(const FingerprintResult& r) {
  json per_label = json::array();
  for (const CoreGenResult& g : r.per_label) per_label.push_back(to_json(g));
  json kept = json::array();
  for (const CorePoint& cp : r.fingerprint.core_points) kept.push_back(cp.label);
  return json{{"schema", kTraceSchema},
              {"victim_id", r.fingerprint.victim_id},
              {"kept_labels", kept},
              {"per_label", per_label}};
}

FingerprintResult fingerprint_result_from_json(const json& j) {
  require_schema(j, kTraceSchema);
  return parse_guard("trace", [&] {
    FingerprintResult r;
    r.fingerprint.victim_id = j.at("victim_id").get<std::string>();
    for (const json& g : j.at("per_label")) {
      r.per_label.push_back(core_gen_result_from_json(g));
    }
    for (int label : j.at("kept_labels").get<std::vector<int>>()) {
      if (label < 0 || static_cast<std::size_t>(label) >= r.per_label.size()) {
        throw ParseError("trace: kept label out of range");
      }
      r.fingerprint.core_points.push_back(r.per_label[label].core);
    }
    return r;
  });
}

json to_json(const SuspectTranscript& t) {
  return json{{"schema", kTranscriptSchema},
              {"model_id", t.model_id},
              {"labels", t.labels},
              {"outputs", t.outputs}};
}

SuspectTranscript transcript_from_json(const json& j) {
  require_schema(j, kTranscriptSchema);
  SuspectTranscript t = parse_guard("transcript", [&] {
    SuspectTranscript out;
    out.model_id = j.at("model_id").get<std::string>();
    out.labels = j.at("labels").get<std::vector<int>>();
    out.outputs = j.at("outputs").get<std::vector<std::vector<double>>>();
    return out;
  });
  t.validate();
  return t;
}

json to_json(const Thresholds& th) {
  return json{{"schema", kThresholdsSchema}, {"d1", th.d1},
              {"d2", th.d2},                 {"l1_margin", th.l1_margin},
              {"cos_margin", th.cos_margin}, {"l1_overlap", th.l1_overlap},
              {"cos_overlap", th.cos_overlap}};
}

Thresholds thresholds_from_json(const json& j) {
  require_schema(j, kThresholdsSchema);
  return parse_guard("thresholds", [&] {
    Thresholds th;
    th.d1 = j.at("d1").get<double>();
    th.d2 = j.at("d2").get<double>();
    th.l1_margin = j.at("l1_margin").get<double>();
    th.cos_margin = j.at("cos_margin").get<double>();
    th.l1_overlap = j.at("l1_overlap").get<bool>();
    th.cos_overlap = j.at("cos_overlap").get<bool>();
    return th;
  });
}

json manifest_entry(const ModelRecord& rec, const std::string& params_path) {
  json j{{"model_id", rec.model_id},
         {"kind", to_string(rec.kind)},
         {"seed", rec.seed},
         {"fidelity", rec.fidelity},
         {"objective", rec.objective},
         {"params_path", params_path}};
  j["lineage"] = rec.lineage ? json(*rec.lineage) : json(nullptr);
  return j;
}

void save_json(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
  out.flush();
  if (!out.good()) throw IoError("write failed: " + path);
}

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace deepcore
