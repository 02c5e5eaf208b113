#pragma once

#include <string>

#include "json.hpp"

#include "deepcore/dataset.hpp"
#include "deepcore/fingerprint.hpp"
#include "deepcore/identify.hpp"
#include "deepcore/network.hpp"
#include "deepcore/zoo.hpp"

namespace deepcore {

using json = nlohmann::json;

// Every artifact carries a "schema" tag; loaders reject files whose tag does
// not match. Doubles round-trip exactly through these files.

json to_json(const Tensor& t);
Tensor tensor_from_json(const json& j);

json to_json(const Network& net);            // deepcore.network/1
Network network_from_json(const json& j);

json to_json(const LabeledDataset& data);    // deepcore.dataset/1
LabeledDataset dataset_from_json(const json& j);

json to_json(const Fingerprint& fp);         // deepcore.fingerprint/1
Fingerprint fingerprint_from_json(const json& j);

json to_json(const CoreGenResult& r);
CoreGenResult core_gen_result_from_json(const json& j);

json to_json(const FingerprintResult& r);    // deepcore.trace/1
FingerprintResult fingerprint_result_from_json(const json& j);

json to_json(const SuspectTranscript& t);    // deepcore.transcript/1
SuspectTranscript transcript_from_json(const json& j);

json to_json(const Thresholds& th);          // deepcore.thresholds/1
Thresholds thresholds_from_json(const json& j);

// Zoo manifest row: identity, lineage, seed, fidelity, and where the
// parameters were written.
json manifest_entry(const ModelRecord& rec, const std::string& params_path);

void require_schema(const json& j, const std::string& expected);

void save_json(const json& j, const std::string& path);
json load_json(const std::string& path);

}  // namespace deepcore
