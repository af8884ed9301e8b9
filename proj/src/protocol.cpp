#include "batchbound/protocol.hpp"

#include <cmath>
#include <utility>

#include "batchbound/errors.hpp"

namespace batchbound {

void QueryBatch::validate() const {
  if (round < 1) throw ConfigError("QueryBatch: round must be >= 1");
  if (queries.empty() && induced.empty()) throw ConfigError("QueryBatch: batch is empty");
  if (!queries.empty() && !induced.empty())
    throw ConfigError("QueryBatch: batch mixes policy-free and policy-induced queries");
  for (const InducedQuery& t : induced) {
    if (t.steps < 1) throw ConfigError("QueryBatch: induced query needs steps >= 1");
    if (!t.policy) throw ConfigError("QueryBatch: induced query has no policy");
  }
}

bool FeedbackRecord::operator==(const FeedbackRecord& o) const {
  if (!(query == o.query) || reward != o.reward || deterministic != o.deterministic) return false;
  if (successor.coords() != o.successor.coords()) return false;
  if (policy_eval.has_value() != o.policy_eval.has_value()) return false;
  if (policy_eval && policy_eval->coords() != o.policy_eval->coords()) return false;
  return true;
}

void Transcript::append(QueryBatch batch, std::vector<FeedbackRecord> records) {
  if (batch.round != K + 1) throw InvariantBreach("Transcript: rounds must arrive in order");
  n_total += static_cast<int>(records.size());
  K = batch.round;
  batches.push_back(Entry{std::move(batch), std::move(records)});
}

std::vector<FeedbackRecord> Transcript::all_records() const {
  std::vector<FeedbackRecord> out;
  out.reserve(static_cast<std::size_t>(n_total));
  for (const Entry& e : batches) out.insert(out.end(), e.records.begin(), e.records.end());
  return out;
}

bool Transcript::operator==(const Transcript& o) const {
  if (K != o.K || n_total != o.n_total || batches.size() != o.batches.size()) return false;
  for (std::size_t i = 0; i < batches.size(); ++i) {
    const Entry& a = batches[i];
    const Entry& b = o.batches[i];
    if (a.batch.round != b.batch.round) return false;
    if (a.batch.queries.size() != b.batch.queries.size()) return false;
    for (std::size_t j = 0; j < a.batch.queries.size(); ++j)
      if (!(a.batch.queries[j] == b.batch.queries[j])) return false;
    if (a.records.size() != b.records.size()) return false;
    for (std::size_t j = 0; j < a.records.size(); ++j)
      if (!(a.records[j] == b.records[j])) return false;
  }
  return true;
}

ProtocolResult run_protocol(Environment& env, Learner& learner, int K, Family problem) {
  if (K < 1) throw ConfigError("run_protocol: K must be >= 1");
  if (problem != env.family()) throw ConfigError("run_protocol: problem does not match environment");

  Transcript transcript;
  for (int round = 1; round <= K; ++round) {
    QueryBatch batch = learner.select_batch(round, transcript);
    batch.validate();
    if (batch.round != round) throw ConfigError("run_protocol: learner mislabeled the round");
    if (batch.policy_induced()) {
      batch.queries = expand_policy_induced(env, batch.induced);
      batch.induced.clear();
    }

    std::vector<FeedbackRecord> records = env.answer_batch(round, batch.queries);
    if (records.size() != batch.queries.size())
      throw InvariantBreach("run_protocol: one feedback record per query is required");
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (!(records[i].query == batch.queries[i]))
        throw InvariantBreach("run_protocol: feedback does not line up with its query");
      if (records[i].policy_eval.has_value() != (problem == Family::PE))
        throw InvariantBreach("run_protocol: policy_eval presence violates the family split");
    }
    transcript.append(std::move(batch), std::move(records));
  }

  if (problem == Family::PE) learner.receive_policy(env.reveal_target_policy());
  LearnerOutput out = learner.output(transcript);
  return ProtocolResult{std::move(transcript), std::move(out)};
}

std::vector<StateAction> expand_policy_induced(Environment& env,
                                               const std::vector<InducedQuery>& triples) {
  return expand_policy_induced_with([&env](const StateAction& sa) { return env.advance(sa); },
                                    triples);
}

std::vector<StateAction> expand_policy_induced_with(
    const std::function<State(const StateAction&)>& step,
    const std::vector<InducedQuery>& triples) {
  std::vector<StateAction> out;
  auto seen = [&out](const StateAction& sa) {
    for (const StateAction& q : out)
      if (q == sa) return true;
    return false;
  };
  for (const InducedQuery& t : triples) {
    if (t.steps < 1) throw ConfigError("expand_policy_induced: steps must be >= 1");
    if (!t.policy) throw ConfigError("expand_policy_induced: induced query has no policy");
    State s = t.s0;
    for (int i = 0; i < t.steps; ++i) {
      StateAction sa{s, t.policy(s)};
      if (!seen(sa)) out.push_back(sa);
      s = step(sa);
    }
  }
  return out;
}

std::vector<FeedbackRecord> feedback_for(const HardInstance& inst,
                                         const std::vector<StateAction>& queries) {
  std::vector<FeedbackRecord> out;
  out.reserve(queries.size());
  for (const StateAction& sa : queries) {
    if (sa.state.dim() != inst.d() || sa.action.dim() != inst.d())
      throw ConfigError("feedback_for: query dimension does not match the instance");
    BallVector next = successor(inst, sa);
    std::optional<BallVector> eval;
    if (inst.family == Family::PE) eval = target_policy_action(inst, State::at(next));
    out.push_back(FeedbackRecord{sa, reward(inst, sa), std::move(next), std::move(eval), true});
  }
  return out;
}

Transcript replayed(const HardInstance& inst, const Transcript& t) {
  Transcript out;
  for (const Transcript::Entry& e : t.batches) {
    QueryBatch b;
    b.round = e.batch.round;
    b.queries = e.batch.queries;
    std::vector<FeedbackRecord> records = feedback_for(inst, b.queries);
    out.append(std::move(b), std::move(records));
  }
  return out;
}

bool replay_matches(const HardInstance& inst, const Transcript& t) {
  return replayed(inst, t) == t;
}

PESoundness evaluate_pe_soundness(const HardInstance& inst,
                                  const std::function<double(const BallVector&)>& qhat, double eps,
                                  const std::vector<BallVector>& probe_actions) {
  if (inst.family != Family::PE)
    throw ConfigError("evaluate_pe_soundness: instance is not a PE instance");
  if (probe_actions.empty()) throw ConfigError("evaluate_pe_soundness: no probe actions");
  State sbar = State::start(inst.d());
  double max_error = 0.0;
  for (const BallVector& a : probe_actions) {
    double err = std::abs(true_q(inst, StateAction{sbar, a}) - qhat(a));
    max_error = std::max(max_error, err);
  }
  return PESoundness{max_error, max_error < eps};
}

BPISoundness evaluate_bpi_soundness(const HardInstance& inst, const BallVector& pihat_first_action,
                                    double eps) {
  if (inst.family != Family::BPI)
    throw ConfigError("evaluate_bpi_soundness: instance is not a BPI instance");
  if (pihat_first_action.dim() != inst.d())
    throw ConfigError("evaluate_bpi_soundness: action dimension mismatch");
  // Ball membership is enforced by the BallVector type itself.
  // V*(start) = 1 and V^pihat(start) = sign * a^T w in closed form.
  double sub = 1.0 - inst.sign * pihat_first_action.coords().dot(inst.w());
  return BPISoundness{sub, sub < eps};
}

bool sample_efficiency_check(const Transcript& t, int d, double alpha, int T) {
  if (alpha <= 0.0) throw ConfigError("sample_efficiency_check: alpha must be positive");
  if (T < 1) throw ConfigError("sample_efficiency_check: T must be >= 1");
  return static_cast<double>(t.n_total) <=
         alpha * std::pow(static_cast<double>(d), static_cast<double>(T));
}

FixedInstanceEnvironment::FixedInstanceEnvironment(HardInstance inst) : inst_(std::move(inst)) {
  inst_.validate();
}

std::vector<FeedbackRecord> FixedInstanceEnvironment::answer_batch(
    int round, const std::vector<StateAction>& queries) {
  (void)round;  // a committed instance answers the same way in every round
  return feedback_for(inst_, queries);
}

State FixedInstanceEnvironment::advance(const StateAction& sa) {
  return State::at(successor(inst_, sa));
}

Policy FixedInstanceEnvironment::reveal_target_policy() {
  if (inst_.family != Family::PE)
    throw ConfigError("FixedInstanceEnvironment: only PE sessions reveal a target policy");
  return canonical_policy(inst_);
}

}  // namespace batchbound
