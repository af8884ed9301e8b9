#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "batchbound/errors.hpp"
#include "batchbound/exact_unit.hpp"
#include "batchbound/mdp.hpp"
#include "batchbound/protocol.hpp"
#include "batchbound/rng.hpp"

using namespace batchbound;

namespace {

Eigen::VectorXd vec3(double a, double b, double c) {
  Eigen::VectorXd v(3);
  v << a, b, c;
  return v;
}

// B_1 = span{e1, e2} in R^3, w = e1.
HardInstance plane_instance(Family family, int sign) {
  HardInstance inst;
  inst.family = family;
  inst.gamma = 0.9;
  inst.sign = sign;
  Eigen::MatrixXd b(3, 2);
  b << 1, 0, 0, 1, 0, 0;
  inst.chain.subspaces.push_back(Subspace::from_orthonormal(b));
  inst.chain.w = vec3(1, 0, 0);
  inst.chain.committed_upto = 1;
  return inst;
}

// Depth-1 chain whose only subspace is the w line, w = (e1 + e2)/sqrt(2)
// exactified so that w.dot(w) == 1.0 bit-exactly. Every coordinate axis then
// sits at cosine 1/sqrt(2) < 0.9 from w.
HardInstance diagonal_instance(Family family, int sign) {
  HardInstance inst;
  inst.family = family;
  inst.gamma = 0.9;
  inst.sign = sign;
  Eigen::VectorXd w = exact_unit(vec3(1, 1, 0));
  inst.chain.subspaces.push_back(Subspace::line(w));
  inst.chain.w = w;
  inst.chain.committed_upto = 1;
  return inst;
}

// Plays a pre-written batch per round; remembers whether the target policy
// was revealed.
struct ScriptedLearner : Learner {
  std::vector<QueryBatch> script;
  bool got_policy = false;

  QueryBatch select_batch(int round, const Transcript&) override { return script.at(round - 1); }
  void receive_policy(Policy) override { got_policy = true; }
  LearnerOutput output(const Transcript&) override { return {}; }
};

// Forwards to a committed instance but corrupts the answers in a chosen way.
struct BrokenEnvironment : Environment {
  enum Mode { kDropRecord, kSwapQuery, kStripEval } mode;
  FixedInstanceEnvironment inner;

  BrokenEnvironment(Mode m, HardInstance inst) : mode(m), inner(std::move(inst)) {}

  int dim() const override { return inner.dim(); }
  double discount() const override { return inner.discount(); }
  Family family() const override { return inner.family(); }
  State advance(const StateAction& sa) override { return inner.advance(sa); }
  Policy reveal_target_policy() override { return inner.reveal_target_policy(); }

  std::vector<FeedbackRecord> answer_batch(int round,
                                           const std::vector<StateAction>& queries) override {
    std::vector<FeedbackRecord> records = inner.answer_batch(round, queries);
    switch (mode) {
      case kDropRecord:
        records.pop_back();
        break;
      case kSwapQuery:
        std::swap(records.front().query, records.back().query);
        break;
      case kStripEval:
        for (FeedbackRecord& r : records) r.policy_eval.reset();
        break;
    }
    return records;
  }
};

QueryBatch coordinate_batch(int round, int d) {
  QueryBatch b;
  b.round = round;
  for (int i = 0; i < d; ++i)
    b.queries.push_back(StateAction{State::start(d), BallVector(Eigen::VectorXd::Unit(d, i))});
  return b;
}

}  // namespace

TEST_CASE("query batch validation") {
  QueryBatch good = coordinate_batch(1, 3);
  CHECK_NOTHROW(good.validate());

  QueryBatch bad_round = good;
  bad_round.round = 0;
  CHECK_THROWS_AS(bad_round.validate(), ConfigError);

  QueryBatch empty;
  empty.round = 1;
  CHECK_THROWS_AS(empty.validate(), ConfigError);

  Policy stay = [](const State& s) { return BallVector(s.point()); };
  QueryBatch mixed = good;
  mixed.induced.push_back(InducedQuery{State::start(3), stay, 1});
  CHECK_THROWS_AS(mixed.validate(), ConfigError);

  QueryBatch induced;
  induced.round = 1;
  induced.induced.push_back(InducedQuery{State::start(3), stay, 0});
  CHECK_THROWS_AS(induced.validate(), ConfigError);
  induced.induced.front().steps = 2;
  CHECK_NOTHROW(induced.validate());
  induced.induced.front().policy = nullptr;
  CHECK_THROWS_AS(induced.validate(), ConfigError);
}

TEST_CASE("feedback records compare exactly") {
  StateAction sa{State::start(3), BallVector(vec3(1, 0, 0))};
  FeedbackRecord a{sa, 0.25, BallVector(vec3(0, 1, 0)), BallVector(vec3(0, 0, 1)), true};
  FeedbackRecord b = a;
  CHECK(a == b);

  b.reward = std::nextafter(0.25, 1.0);
  CHECK(!(a == b));

  b = a;
  b.policy_eval.reset();
  CHECK(!(a == b));

  b = a;
  b.successor = BallVector(vec3(0, 1, 1e-300));
  CHECK(!(a == b));
}

TEST_CASE("transcript bookkeeping") {
  HardInstance inst = diagonal_instance(Family::PE, +1);
  Transcript t;
  QueryBatch b1 = coordinate_batch(1, 3);
  t.append(b1, feedback_for(inst, b1.queries));
  CHECK(t.K == 1);
  CHECK(t.n_total == 3);

  QueryBatch wrong_round = coordinate_batch(3, 3);
  CHECK_THROWS_AS(t.append(wrong_round, feedback_for(inst, wrong_round.queries)), InvariantBreach);

  QueryBatch b2 = coordinate_batch(2, 3);
  b2.queries.pop_back();
  t.append(b2, feedback_for(inst, b2.queries));
  CHECK(t.K == 2);
  CHECK(t.n_total == 5);
  CHECK(t.all_records().size() == 5);
  CHECK(t.all_records()[3] == t.batches[1].records[0]);
}

TEST_CASE("fixed instance session answers coordinate queries with zero rewards") {
  // Hand check: every e_i has e_i . w in {1/sqrt(2), 0}, never above 0.9, so
  // no query lands in a cap and every reward is exactly zero.
  HardInstance inst = diagonal_instance(Family::PE, +1);
  FixedInstanceEnvironment env(inst);
  ScriptedLearner learner;
  learner.script.push_back(coordinate_batch(1, 3));

  ProtocolResult res = run_protocol(env, learner, 1, Family::PE);
  CHECK(res.transcript.K == 1);
  CHECK(res.transcript.n_total == 3);
  REQUIRE(res.transcript.batches.size() == 1);
  for (const FeedbackRecord& r : res.transcript.batches[0].records) {
    CHECK(r.reward == 0.0);
    CHECK(r.deterministic);
    REQUIRE(r.policy_eval.has_value());
    // PE dynamics: the successor is the queried action itself.
    CHECK(r.successor.coords() == r.query.action.coords());
  }
  // pi(e1) = (1/gamma) proj_w(e1) = (5/9, 5/9, 0).
  const BallVector& eval = *res.transcript.batches[0].records[0].policy_eval;
  CHECK(eval.coords()[0] == doctest::Approx(5.0 / 9.0).epsilon(1e-12));
  CHECK(eval.coords()[1] == doctest::Approx(5.0 / 9.0).epsilon(1e-12));
  CHECK(eval.coords()[2] == 0.0);
  CHECK(learner.got_policy);
}

TEST_CASE("bpi feedback omits the policy evaluation") {
  HardInstance inst = diagonal_instance(Family::BPI, +1);
  FixedInstanceEnvironment env(inst);
  ScriptedLearner learner;
  QueryBatch b;
  b.round = 1;
  b.queries.push_back(StateAction{State::start(3), BallVector(vec3(0, 0, 1))});
  learner.script.push_back(b);

  ProtocolResult res = run_protocol(env, learner, 1, Family::BPI);
  const FeedbackRecord& r = res.transcript.batches[0].records[0];
  CHECK(!r.policy_eval.has_value());
  // e3 is orthogonal to the whole chain, so the case map sends it to zero.
  CHECK(r.successor.coords() == Eigen::VectorXd::Zero(3));
  CHECK(!learner.got_policy);
}

TEST_CASE("policy induced expansion follows the deterministic trajectory") {
  HardInstance inst = plane_instance(Family::PE, +1);
  FixedInstanceEnvironment env(inst);
  Policy pi = canonical_policy(inst);

  // Hand-stepped: pi(e3) = (1/gamma) proj_{B1}(e3) = 0, successor of (e3, 0)
  // is 0, and (0, 0) repeats from there on.
  std::vector<StateAction> reach =
      expand_policy_induced(env, {InducedQuery{State::at(BallVector(vec3(0, 0, 1))), pi, 3}});
  REQUIRE(reach.size() == 2);
  CHECK(reach[0].state.point() == vec3(0, 0, 1));
  CHECK(reach[0].action.coords() == Eigen::VectorXd::Zero(3));
  CHECK(reach[1].state.point() == Eigen::VectorXd::Zero(3));
  CHECK(reach[1].action.coords() == Eigen::VectorXd::Zero(3));

  // steps = 1 keeps only the first pair.
  std::vector<StateAction> one =
      expand_policy_induced(env, {InducedQuery{State::at(BallVector(vec3(0, 0, 1))), pi, 1}});
  REQUIRE(one.size() == 1);
  CHECK(one[0] == reach[0]);

  // Duplicate triples add nothing.
  std::vector<StateAction> twice = expand_policy_induced(
      env, {InducedQuery{State::at(BallVector(vec3(0, 0, 1))), pi, 3},
            InducedQuery{State::at(BallVector(vec3(0, 0, 1))), pi, 3}});
  CHECK(twice.size() == 2);

  // A cap state is a fixed point of the target policy: the trajectory never
  // leaves it and the reach set is a single pair.
  std::vector<StateAction> cap =
      expand_policy_induced(env, {InducedQuery{State::at(BallVector(vec3(0.95, 0, 0))), pi, 4}});
  REQUIRE(cap.size() == 1);
  CHECK(cap[0].action.coords() == vec3(0.95, 0, 0));
}

TEST_CASE("expansion submitted policy-free reproduces induced play") {
  HardInstance inst = plane_instance(Family::PE, +1);

  // Contraction by 0.8 composed with a rotation about e3: stays in the ball
  // and never revisits a point, so the reach sets are all distinct.
  Eigen::Matrix3d rot;
  rot << std::cos(1.0), -std::sin(1.0), 0, std::sin(1.0), std::cos(1.0), 0, 0, 0, 1;
  Eigen::MatrixXd m = 0.8 * rot;
  Policy spiral = [m](const State& s) { return BallVector(m * s.point()); };

  std::vector<InducedQuery> triples = {
      InducedQuery{State::at(BallVector(vec3(0.3, 0.2, 0.6))), spiral, 4},
      InducedQuery{State::at(BallVector(vec3(-0.5, 0.1, 0.0))), spiral, 2}};

  ScriptedLearner induced;
  induced.script.emplace_back();
  induced.script[0].round = 1;
  induced.script[0].induced = triples;
  FixedInstanceEnvironment env_a(inst);
  ProtocolResult play_a = run_protocol(env_a, induced, 1, Family::PE);

  FixedInstanceEnvironment env_b(inst);
  ScriptedLearner flat;
  flat.script.emplace_back();
  flat.script[0].round = 1;
  flat.script[0].queries = expand_policy_induced(env_b, triples);
  ProtocolResult play_b = run_protocol(env_b, flat, 1, Family::PE);

  CHECK(play_a.transcript == play_b.transcript);
  CHECK(play_a.transcript.n_total == 6);
}

TEST_CASE("run protocol rejects malformed sessions") {
  HardInstance inst = diagonal_instance(Family::PE, +1);

  {
    FixedInstanceEnvironment env(inst);
    ScriptedLearner learner;
    learner.script.push_back(coordinate_batch(1, 3));
    CHECK_THROWS_AS(run_protocol(env, learner, 0, Family::PE), ConfigError);
    CHECK_THROWS_AS(run_protocol(env, learner, 1, Family::BPI), ConfigError);
  }
  {
    FixedInstanceEnvironment env(inst);
    ScriptedLearner learner;
    learner.script.push_back(coordinate_batch(2, 3));  // mislabeled round
    CHECK_THROWS_AS(run_protocol(env, learner, 1, Family::PE), ConfigError);
  }
  {
    FixedInstanceEnvironment env(inst);
    ScriptedLearner learner;
    learner.script.emplace_back();
    learner.script[0].round = 1;  // empty batch
    CHECK_THROWS_AS(run_protocol(env, learner, 1, Family::PE), ConfigError);
  }
}

TEST_CASE("run protocol rejects inconsistent environments") {
  HardInstance inst = diagonal_instance(Family::PE, +1);
  for (auto mode :
       {BrokenEnvironment::kDropRecord, BrokenEnvironment::kSwapQuery, BrokenEnvironment::kStripEval}) {
    BrokenEnvironment env(mode, inst);
    ScriptedLearner learner;
    learner.script.push_back(coordinate_batch(1, 3));
    CHECK_THROWS_AS(run_protocol(env, learner, 1, Family::PE), InvariantBreach);
  }
}

TEST_CASE("replay is deterministic and detects tampering") {
  HardInstance inst = random_hard_instance(Family::PE, 6, 0.9, -1, 2, 77);
  std::mt19937_64 eng = make_engine(78);

  QueryBatch b;
  b.round = 1;
  for (int i = 0; i < 10; ++i)
    b.queries.push_back(StateAction{State::start(6), BallVector(random_ball_point(6, eng))});

  std::vector<FeedbackRecord> once = feedback_for(inst, b.queries);
  std::vector<FeedbackRecord> again = feedback_for(inst, b.queries);
  REQUIRE(once.size() == again.size());
  for (std::size_t i = 0; i < once.size(); ++i) CHECK(once[i] == again[i]);

  Transcript t;
  t.append(b, std::move(once));
  CHECK(replay_matches(inst, t));
  CHECK(replayed(inst, t) == t);

  Transcript tampered = t;
  tampered.batches[0].records[3].reward += 1e-9;
  CHECK(!replay_matches(inst, tampered));

  tampered = t;
  Eigen::VectorXd bumped = tampered.batches[0].records[5].successor.coords();
  bumped[0] = std::nextafter(bumped[0], 2.0);
  tampered.batches[0].records[5].successor = BallVector(bumped);
  CHECK(!replay_matches(inst, tampered));
}

TEST_CASE("pe soundness grading") {
  HardInstance inst = diagonal_instance(Family::PE, +1);
  State sbar = State::start(3);
  std::vector<BallVector> probes = {BallVector(inst.w()), BallVector(-inst.w()),
                                    BallVector(vec3(0, 0, 1))};

  PESoundness perfect = evaluate_pe_soundness(
      inst, [&](const BallVector& a) { return true_q(inst, StateAction{sbar, a}); }, 1e-9, probes);
  CHECK(perfect.max_error == 0.0);
  CHECK(perfect.sound);

  // w.dot(w) == 1.0 bit-exactly, so the blind answer misses by exactly 1 and
  // fails soundness at eps = 1 (strict inequality).
  PESoundness blind =
      evaluate_pe_soundness(inst, [](const BallVector&) { return 0.0; }, 1.0, probes);
  CHECK(blind.max_error == 1.0);
  CHECK(!blind.sound);

  CHECK_THROWS_AS(evaluate_pe_soundness(inst, [](const BallVector&) { return 0.0; }, 1.0, {}),
                  ConfigError);
  HardInstance bpi = diagonal_instance(Family::BPI, +1);
  CHECK_THROWS_AS(evaluate_pe_soundness(bpi, [](const BallVector&) { return 0.0; }, 1.0, probes),
                  ConfigError);
}

TEST_CASE("bpi soundness closed form") {
  HardInstance plus = diagonal_instance(Family::BPI, +1);
  HardInstance minus = diagonal_instance(Family::BPI, -1);

  BPISoundness aligned = evaluate_bpi_soundness(plus, BallVector(plus.w()), 1e-9);
  CHECK(aligned.suboptimality == 0.0);
  CHECK(aligned.sound);

  BPISoundness crossed = evaluate_bpi_soundness(minus, BallVector(minus.w()), 1.0);
  CHECK(crossed.suboptimality == 2.0);
  CHECK(!crossed.sound);

  // e3 is exactly orthogonal to w, so the gap is exactly 1.
  BPISoundness sideways = evaluate_bpi_soundness(plus, BallVector(vec3(0, 0, 1)), 1.0);
  CHECK(sideways.suboptimality == 1.0);
  CHECK(!sideways.sound);

  CHECK_THROWS_AS(evaluate_bpi_soundness(plus, BallVector::unit(Eigen::VectorXd::Ones(2)), 1.0),
                  ConfigError);
  HardInstance pe = diagonal_instance(Family::PE, +1);
  CHECK_THROWS_AS(evaluate_bpi_soundness(pe, BallVector(vec3(1, 0, 0)), 1.0), ConfigError);
}

TEST_CASE("sample efficiency threshold") {
  Transcript t;
  t.n_total = 5;
  CHECK(sample_efficiency_check(t, 5, 1.0, 1));
  t.n_total = 26;
  CHECK(!sample_efficiency_check(t, 5, 1.0, 2));
  t.n_total = 188;  // ceil(1.5 * 125)
  CHECK(sample_efficiency_check(t, 5, 2.0, 3));
  CHECK_THROWS_AS(sample_efficiency_check(t, 5, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(sample_efficiency_check(t, 5, 1.0, 0), ConfigError);
}
