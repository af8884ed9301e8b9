#include "batchbound/io.hpp"

#include <fstream>
#include <sstream>
#include <utility>

#include "batchbound/errors.hpp"

namespace batchbound {

namespace {

// Malformed input files are a configuration problem, not a library bug.
[[noreturn]] void parse_fail(const char* what, const std::exception& e) {
  throw ConfigError(std::string(what) + ": " + e.what());
}

}  // namespace

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_array()) throw ConfigError("vector_from_json: expected an array");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    Eigen::Index i = 0;
    for (const auto& x : j) v[i++] = x.get<double>();
    return v;
  } catch (const nlohmann::json::exception& e) {
    parse_fail("vector_from_json", e);
  }
}

nlohmann::json subspace_to_json(const Subspace& s) {
  nlohmann::json cols = nlohmann::json::array();
  for (int c = 0; c < s.dim(); ++c) cols.push_back(vector_to_json(s.basis().col(c)));
  return nlohmann::json{{"ambient_dim", s.ambient_dim()}, {"dim", s.dim()}, {"basis", cols}};
}

Subspace subspace_from_json(const nlohmann::json& j) {
  try {
    const int d = j.at("ambient_dim").get<int>();
    const int m = j.at("dim").get<int>();
    const auto& cols = j.at("basis");
    if (static_cast<int>(cols.size()) != m)
      throw ConfigError("subspace_from_json: basis column count does not match dim");
    Eigen::MatrixXd basis(d, m);
    for (int c = 0; c < m; ++c) {
      Eigen::VectorXd col = vector_from_json(cols[static_cast<std::size_t>(c)]);
      if (col.size() != d) throw ConfigError("subspace_from_json: column length mismatch");
      basis.col(c) = col;
    }
    return Subspace::from_orthonormal(basis);
  } catch (const nlohmann::json::exception& e) {
    parse_fail("subspace_from_json", e);
  } catch (const std::invalid_argument& e) {
    parse_fail("subspace_from_json", e);
  }
}

nlohmann::json packing_to_json(const Packing& p) {
  nlohmann::json members = nlohmann::json::array();
  for (const Subspace& s : p.members) members.push_back(subspace_to_json(s));
  return nlohmann::json{{"d", p.d}, {"m", p.m}, {"gamma", p.gamma}, {"members", members}};
}

Packing packing_from_json(const nlohmann::json& j) {
  try {
    Packing p;
    p.d = j.at("d").get<int>();
    p.m = j.at("m").get<int>();
    p.gamma = j.at("gamma").get<double>();
    for (const auto& mj : j.at("members")) p.members.push_back(subspace_from_json(mj));
    p.validate();
    return p;
  } catch (const nlohmann::json::exception& e) {
    parse_fail("packing_from_json", e);
  } catch (const std::invalid_argument& e) {
    parse_fail("packing_from_json", e);
  }
}

nlohmann::json instance_to_json(const HardInstance& inst) {
  nlohmann::json subspaces = nlohmann::json::array();
  for (const Subspace& s : inst.chain.subspaces) subspaces.push_back(subspace_to_json(s));
  return nlohmann::json{
      {"family", inst.family == Family::PE ? "PE" : "BPI"},
      {"gamma", inst.gamma},
      {"sign", inst.sign},
      {"chain",
       {{"subspaces", subspaces}, {"committed_upto", inst.chain.committed_upto}}},
      {"w", vector_to_json(inst.w())}};
}

HardInstance instance_from_json(const nlohmann::json& j) {
  try {
    HardInstance inst;
    const std::string family = j.at("family").get<std::string>();
    if (family == "PE")
      inst.family = Family::PE;
    else if (family == "BPI")
      inst.family = Family::BPI;
    else
      throw ConfigError("instance_from_json: family must be PE or BPI");
    inst.gamma = j.at("gamma").get<double>();
    inst.sign = j.at("sign").get<int>();
    const auto& chain = j.at("chain");
    for (const auto& sj : chain.at("subspaces"))
      inst.chain.subspaces.push_back(subspace_from_json(sj));
    inst.chain.committed_upto = chain.at("committed_upto").get<int>();
    inst.chain.w = vector_from_json(j.at("w"));
    inst.validate();
    return inst;
  } catch (const nlohmann::json::exception& e) {
    parse_fail("instance_from_json", e);
  } catch (const std::invalid_argument& e) {
    parse_fail("instance_from_json", e);
  }
}

nlohmann::json record_to_json(int round, const FeedbackRecord& r) {
  nlohmann::json line{{"round", round},
                      {"s", r.query.state.is_start() ? nlohmann::json()
                                                     : vector_to_json(r.query.state.point())},
                      {"a", vector_to_json(r.query.action.coords())},
                      {"r", r.reward},
                      {"s_next", vector_to_json(r.successor.coords())}};
  if (r.policy_eval) line["pi_eval"] = vector_to_json(r.policy_eval->coords());
  return line;
}

std::string transcript_to_jsonl(const Transcript& t) {
  std::string out;
  for (const Transcript::Entry& e : t.batches)
    for (const FeedbackRecord& r : e.records) {
      out += record_to_json(e.batch.round, r).dump();
      out += '\n';
    }
  return out;
}

Transcript transcript_from_jsonl(const std::string& text) {
  Transcript t;
  QueryBatch batch;
  std::vector<FeedbackRecord> records;
  auto flush = [&] {
    if (!records.empty()) {
      try {
        t.append(batch, records);
      } catch (const InvariantBreach& e) {
        throw ConfigError(std::string("transcript_from_jsonl: ") + e.what());
      }
      batch.queries.clear();
      records.clear();
    }
  };
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    try {
      nlohmann::json j = nlohmann::json::parse(line);
      const int round = j.at("round").get<int>();
      if (round != batch.round) flush();
      batch.round = round;
      Eigen::VectorXd a = vector_from_json(j.at("a"));
      State s = j.at("s").is_null()
                    ? State::start(static_cast<int>(a.size()))
                    : State::at(BallVector(vector_from_json(j.at("s"))));
      FeedbackRecord rec{StateAction{std::move(s), BallVector(std::move(a))},
                         j.at("r").get<double>(),
                         BallVector(vector_from_json(j.at("s_next"))), std::nullopt, true};
      if (j.contains("pi_eval")) rec.policy_eval = BallVector(vector_from_json(j["pi_eval"]));
      batch.queries.push_back(rec.query);
      records.push_back(std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      parse_fail("transcript_from_jsonl", e);
    } catch (const std::invalid_argument& e) {
      parse_fail("transcript_from_jsonl", e);
    }
  }
  flush();
  return t;
}

nlohmann::json certificate_to_json(const IndistinguishabilityCertificate& c) {
  return nlohmann::json{{"q_gap", c.q_gap},
                        {"replay_match", c.replay_match},
                        {"w", vector_to_json(c.instance_plus.w())},
                        {"sign_pair", true}};
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << content;
  if (!out.flush()) throw ConfigError("failed writing " + path);
}

}  // namespace batchbound
