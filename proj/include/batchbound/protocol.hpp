#pragma once

#include <optional>
#include <vector>

#include "batchbound/mdp.hpp"

namespace batchbound {

// A policy-induced query: start at s0, follow `policy` for `steps` steps, and
// query every state-action pair on the trajectory.
struct InducedQuery {
  State s0;
  Policy policy;
  int steps = 1;
};

// One round's worth of queries. A batch is either policy-free (explicit
// state-action pairs) or policy-induced (trajectory triples), never a mix.
struct QueryBatch {
  int round = 1;  // 1-based
  std::vector<StateAction> queries;
  std::vector<InducedQuery> induced;

  bool policy_induced() const { return !induced.empty(); }
  // round >= 1 and exactly one of the two query lists nonempty.
  void validate() const;
};

// Feedback for a single query. Transitions in every constructed environment
// are deterministic, so the support is a single successor state; the flag
// records that this encoding is lossless. policy_eval is the environment's
// target policy at the successor and is present exactly for PE sessions.
struct FeedbackRecord {
  StateAction query;
  double reward;
  BallVector successor;
  std::optional<BallVector> policy_eval;
  bool deterministic = true;

  // Exact coordinate equality on every field; used by replay checks.
  bool operator==(const FeedbackRecord& o) const;
};

// Full record of a session: per-round batches with their feedback, in round
// order. Policy-induced batches are stored in expanded policy-free form.
struct Transcript {
  struct Entry {
    QueryBatch batch;
    std::vector<FeedbackRecord> records;
  };

  std::vector<Entry> batches;
  int K = 0;        // rounds appended so far
  int n_total = 0;  // sum of per-round record counts

  void append(QueryBatch batch, std::vector<FeedbackRecord> records);
  std::vector<FeedbackRecord> all_records() const;
  bool operator==(const Transcript& o) const;
};

// Environment side of the protocol. Implementations: a committed hard
// instance (below) and the lazily committing adversary.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual int dim() const = 0;
  virtual double discount() const = 0;
  virtual Family family() const = 0;

  // Answer every query of the round's (already expanded) batch, in order.
  virtual std::vector<FeedbackRecord> answer_batch(int round,
                                                   const std::vector<StateAction>& queries) = 0;
  // Deterministic one-step dynamics, used to expand policy-induced queries.
  virtual State advance(const StateAction& sa) = 0;
  // PE only: the target policy procedure, handed out after the last round.
  virtual Policy reveal_target_policy() = 0;
};

// What the learner hands back after the session: a linear Q estimate
// qhat(a) = theta . a for PE, a first action for BPI.
struct LearnerOutput {
  std::optional<Eigen::VectorXd> theta;
  std::optional<BallVector> first_action;
};

class Learner {
 public:
  virtual ~Learner() = default;

  virtual QueryBatch select_batch(int round, const Transcript& history) = 0;
  // PE only: called once, after the last round's feedback.
  virtual void receive_policy(Policy pi) { (void)pi; }
  virtual LearnerOutput output(const Transcript& history) = 0;
};

struct ProtocolResult {
  Transcript transcript;
  LearnerOutput output;
};

// Multi-batch session driver. K rounds; each round the learner selects a
// batch with the full prior transcript in hand, policy-induced batches are
// expanded through the environment's dynamics, and the environment answers
// every query. For PE the target policy is revealed after round K. Throws
// ConfigError on a malformed batch and InvariantBreach if the environment's
// answers do not line up with the queries.
ProtocolResult run_protocol(Environment& env, Learner& learner, int K, Family problem);

// Unique state-action pairs of the deterministic trajectories described by
// `triples`, in first-visit order, deduplicated by exact coordinate equality.
std::vector<StateAction> expand_policy_induced(Environment& env,
                                               const std::vector<InducedQuery>& triples);
// Same walk against an arbitrary one-step dynamics; expand_policy_induced is
// this with env.advance. Lets a learner pre-expand its own triples under the
// known dynamics of a class (the PE class moves to the queried action).
std::vector<StateAction> expand_policy_induced_with(
    const std::function<State(const StateAction&)>& step, const std::vector<InducedQuery>& triples);

// Definition-faithful feedback from a committed instance, one record per
// query in order.
std::vector<FeedbackRecord> feedback_for(const HardInstance& inst,
                                         const std::vector<StateAction>& queries);

// Re-answer every batch of `t` from `inst`, keeping rounds and query order.
// replay_matches is true iff the replayed records equal the originals
// exactly.
Transcript replayed(const HardInstance& inst, const Transcript& t);
bool replay_matches(const HardInstance& inst, const Transcript& t);

struct PESoundness {
  double max_error = 0.0;
  bool sound = false;
};

// Grade a PE answer against a known instance: max over probe actions of
// |Q(start, a) - qhat(a)|, sound iff strictly below eps. Probes must be
// nonempty and should include +-w when the instance is known.
PESoundness evaluate_pe_soundness(const HardInstance& inst,
                                  const std::function<double(const BallVector&)>& qhat, double eps,
                                  const std::vector<BallVector>& probe_actions);

struct BPISoundness {
  double suboptimality = 0.0;
  bool sound = false;
};

// Grade a BPI answer: V*(start) - V^pihat(start) = 1 - sign * (a^T w) for
// first action a, sound iff strictly below eps.
BPISoundness evaluate_bpi_soundness(const HardInstance& inst, const BallVector& pihat_first_action,
                                    double eps);

// n_total <= alpha * d^T.
bool sample_efficiency_check(const Transcript& t, int d, double alpha, int T);

// Environment backed by one fully committed instance.
class FixedInstanceEnvironment : public Environment {
 public:
  explicit FixedInstanceEnvironment(HardInstance inst);

  int dim() const override { return inst_.d(); }
  double discount() const override { return inst_.gamma; }
  Family family() const override { return inst_.family; }
  std::vector<FeedbackRecord> answer_batch(int round,
                                           const std::vector<StateAction>& queries) override;
  State advance(const StateAction& sa) override;
  Policy reveal_target_policy() override;

  const HardInstance& instance() const { return inst_; }

 private:
  HardInstance inst_;
};

}  // namespace batchbound
