#pragma once

// JSON encoders and decoders for the library types, plus the JSON-lines
// transcript format. Doubles survive a round trip exactly: emission uses the
// shortest decimal that parses back to the same bits, so byte comparison of
// two transcript files is a faithful proxy for record-level equality.

#include <string>

#include <Eigen/Dense>

#include "batchbound/adversary.hpp"
#include "batchbound/geometry.hpp"
#include "batchbound/mdp.hpp"
#include "batchbound/packing.hpp"
#include "batchbound/protocol.hpp"
#include "json.hpp"

namespace batchbound {

nlohmann::json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const nlohmann::json& j);

// {"ambient_dim": d, "dim": m, "basis": [..columns..]}
nlohmann::json subspace_to_json(const Subspace& s);
Subspace subspace_from_json(const nlohmann::json& j);

// {"d":, "m":, "gamma":, "members": [Subspace...]}
nlohmann::json packing_to_json(const Packing& p);
Packing packing_from_json(const nlohmann::json& j);

// {"family": "PE"|"BPI", "gamma":, "sign":, "chain":, "w": [...]}
nlohmann::json instance_to_json(const HardInstance& inst);
HardInstance instance_from_json(const nlohmann::json& j);

// One transcript line: {"round":, "s":, "a":, "r":, "s_next":, "pi_eval":?}
// with "s" null for the start state and "pi_eval" omitted when absent.
nlohmann::json record_to_json(int round, const FeedbackRecord& r);
std::string transcript_to_jsonl(const Transcript& t);
Transcript transcript_from_jsonl(const std::string& text);

// {"q_gap":, "replay_match":, "w": [...], "sign_pair": true}
nlohmann::json certificate_to_json(const IndistinguishabilityCertificate& c);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace batchbound
