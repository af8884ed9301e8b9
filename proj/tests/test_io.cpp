#include "batchbound/io.hpp"

#include <cstdio>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "batchbound/errors.hpp"
#include "batchbound/learner.hpp"
#include "batchbound/rng.hpp"
#include "doctest.h"

using namespace batchbound;

namespace {

// Serialize through text exactly as a file round trip would.
nlohmann::json reparse(const nlohmann::json& j) { return nlohmann::json::parse(j.dump()); }

HardInstance sample_instance(Family family, int d, int sign, std::uint64_t seed) {
  return random_hard_instance(family, d, 0.9, sign, 2, seed);
}

}  // namespace

TEST_CASE("vectors and subspaces round-trip bit for bit") {
  Eigen::VectorXd v(5);
  v << 1.0 / 3.0, -0.0, 1e-300, -17.25, 0.1;
  Eigen::VectorXd back = vector_from_json(reparse(vector_to_json(v)));
  REQUIRE(back.size() == v.size());
  for (int i = 0; i < 5; ++i) CHECK(back[i] == v[i]);

  auto eng = make_engine(1, 0);
  Eigen::MatrixXd raw(4, 2);
  for (int c = 0; c < 2; ++c) raw.col(c) = gaussian_vector(4, eng);
  Subspace s = Subspace::span_of(raw);
  Subspace s2 = subspace_from_json(reparse(subspace_to_json(s)));
  CHECK(s2.ambient_dim() == s.ambient_dim());
  CHECK(s2.dim() == s.dim());
  CHECK(s2.basis() == s.basis());

  CHECK_THROWS_AS(vector_from_json(nlohmann::json{{"not", "an array"}}), ConfigError);
  nlohmann::json bad = subspace_to_json(s);
  bad["dim"] = 3;
  CHECK_THROWS_AS(subspace_from_json(bad), ConfigError);
  nlohmann::json skewed = subspace_to_json(s);
  skewed["basis"][0][0] = 5.0;  // no longer orthonormal
  CHECK_THROWS_AS(subspace_from_json(skewed), ConfigError);
}

TEST_CASE("packings round-trip and validate on parse") {
  Packing p;
  p.d = 4;
  p.m = 1;
  p.gamma = 0.9;
  p.members.push_back(Subspace::line(Eigen::VectorXd::Unit(4, 0)));
  p.members.push_back(Subspace::line(Eigen::VectorXd::Unit(4, 2)));
  Packing q = packing_from_json(reparse(packing_to_json(p)));
  CHECK(q.d == 4);
  CHECK(q.m == 1);
  CHECK(q.gamma == 0.9);
  REQUIRE(q.members.size() == 2);
  CHECK(q.members[1].basis() == p.members[1].basis());

  nlohmann::json bad = packing_to_json(p);
  bad["m"] = 2;  // members disagree with the declared dimension
  CHECK_THROWS_AS(packing_from_json(bad), ConfigError);
}

TEST_CASE("instances round-trip through JSON with identical feedback") {
  for (Family family : {Family::PE, Family::BPI}) {
    for (int sign : {+1, -1}) {
      HardInstance inst = sample_instance(family, 5, sign, 99);
      HardInstance back = instance_from_json(reparse(instance_to_json(inst)));
      CHECK(back.family == inst.family);
      CHECK(back.gamma == inst.gamma);
      CHECK(back.sign == inst.sign);
      CHECK(back.w() == inst.w());
      REQUIRE(back.chain.depth() == inst.chain.depth());
      for (int i = 0; i < inst.chain.depth(); ++i)
        CHECK(back.chain.subspaces[i].basis() == inst.chain.subspaces[i].basis());

      // Identical parameters must answer identically.
      auto eng = make_engine(7, 0);
      std::vector<StateAction> queries;
      for (int i = 0; i < 6; ++i)
        queries.push_back(StateAction{State::start(5), BallVector(random_ball_point(5, eng))});
      std::vector<FeedbackRecord> a = feedback_for(inst, queries);
      std::vector<FeedbackRecord> b = feedback_for(back, queries);
      REQUIRE(a.size() == b.size());
      for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    }
  }

  nlohmann::json j = instance_to_json(sample_instance(Family::PE, 4, 1, 5));
  j["family"] = "policy";
  CHECK_THROWS_AS(instance_from_json(j), ConfigError);
}

TEST_CASE("transcripts serialize to JSONL and parse back equal") {
  HardInstance inst = sample_instance(Family::PE, 4, 1, 31);
  FixedInstanceEnvironment env(inst);
  auto learner = make_learner("random_unit", Family::PE, 4, 0.9, {3, 2}, 12, false);
  ProtocolResult result = run_protocol(env, *learner, 2, Family::PE);

  std::string jsonl = transcript_to_jsonl(result.transcript);
  Transcript back = transcript_from_jsonl(jsonl);
  CHECK(back == result.transcript);
  CHECK(back.K == 2);
  CHECK(back.n_total == 5);
  // Start-state queries carry a null "s"; PE lines carry policy evaluations.
  nlohmann::json first = nlohmann::json::parse(jsonl.substr(0, jsonl.find('\n')));
  CHECK(first.at("s").is_null());
  CHECK(first.at("round") == 1);
  CHECK(first.contains("pi_eval"));

  // BPI transcripts have no policy line and still round-trip.
  HardInstance bpi = sample_instance(Family::BPI, 4, -1, 32);
  FixedInstanceEnvironment benv(bpi);
  auto blearner = make_learner("coordinate", Family::BPI, 4, 0.9, {2}, 12, false);
  ProtocolResult bres = run_protocol(benv, *blearner, 1, Family::BPI);
  std::string bjsonl = transcript_to_jsonl(bres.transcript);
  CHECK(transcript_from_jsonl(bjsonl) == bres.transcript);
  CHECK(bjsonl.find("pi_eval") == std::string::npos);

  CHECK_THROWS_AS(transcript_from_jsonl("{\"round\": 2, \"s\": null, \"a\": [1.0], "
                                        "\"r\": 0.0, \"s_next\": [0.0]}\n"),
                  ConfigError);
  CHECK_THROWS_AS(transcript_from_jsonl("not json\n"), ConfigError);
}

TEST_CASE("certificates serialize with the sign-pair marker") {
  AdversaryEnvironment env(
      make_adversary(Family::PE, 5, 0.9, 1, AdversaryMode::kMultiBatch, false, 8));
  auto learner = make_learner("random_unit", Family::PE, 5, 0.9, {3}, 77, false);
  ProtocolResult result = run_protocol(env, *learner, 1, Family::PE);
  REQUIRE_FALSE(env.defeated());
  const IndistinguishabilityCertificate& cert = env.certificate();

  nlohmann::json j = reparse(certificate_to_json(cert));
  CHECK(j.at("q_gap") == 2.0);
  CHECK(j.at("replay_match") == true);
  CHECK(j.at("sign_pair") == true);
  CHECK(vector_from_json(j.at("w")) == cert.instance_plus.w());

  // The two signed replays and the recorded transcript are the same bytes.
  std::string original = transcript_to_jsonl(cert.transcript);
  std::string plus = transcript_to_jsonl(replayed(cert.instance_plus, cert.transcript));
  std::string minus = transcript_to_jsonl(replayed(cert.instance_minus, cert.transcript));
  CHECK(plus == original);
  CHECK(minus == original);
}

TEST_CASE("text files round-trip and missing files are config errors") {
  const std::string path = "io_roundtrip_scratch.txt";
  write_text_file(path, "line one\nline two\n");
  CHECK(read_text_file(path) == "line one\nline two\n");
  std::remove(path.c_str());
  CHECK_THROWS_AS(read_text_file("does_not_exist_anywhere.json"), ConfigError);
}
