#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "batchbound/protocol.hpp"

namespace batchbound {

// A residual whose stack drops below this smallest singular value counts as
// linearly dependent, which valid environments can never produce.
inline constexpr double kIndependenceTol = 1e-9;
// Condition number above which the final linear solve refuses to answer.
inline constexpr double kConditionLimit = 1e12;

// Sequential state of the exact fully-adaptive PE solver. After round i the
// stack holds v_i = a_i - gamma * pi(s_i+) together with the observed reward;
// the rows stay linearly independent on every valid environment.
struct SolverState {
  int d = 0;
  std::vector<Eigen::VectorXd> residuals;
  std::vector<double> rewards;
};

// Smallest singular value of the stacked residuals; +infinity for an empty
// stack.
double residual_min_singular(const SolverState& st);

// Deterministic next probe: the first column of the orthonormal complement of
// the residuals, queried at the start state. Throws InvariantBreach when the
// residuals already span all of R^d.
StateAction next_query(const SolverState& st);

// Append v = a - gamma * policy_eval and the reward from the record answering
// the solver's current query. The independence invariant is checked before
// the state mutates; a violation (impossible for valid environments, the
// detection signal for corrupted ones) throws InvariantBreach.
void absorb_feedback(SolverState& st, const FeedbackRecord& fb, double gamma,
                     const Eigen::VectorXd& policy_eval);

// Solve the square stacked system V theta = r by column-pivoted QR. Requires
// exactly d residuals; throws InvariantBreach on condition number above
// kConditionLimit ("ill-conditioned") or a solve residual above 1e-9.
Eigen::VectorXd solve(const SolverState& st);

// Minimum-norm least-squares solution of the (possibly underdetermined)
// stacked system; the zero vector for an empty stack.
Eigen::VectorXd solve_truncated(const SolverState& st);

// Protocol learner wrapping the solver: one query per round, catches up on
// all unseen feedback before choosing. Output is the exact solve after d
// absorbed records and the minimum-norm solve for shorter sessions.
class ExactSolverLearner : public Learner {
 public:
  ExactSolverLearner(int d, double gamma);

  QueryBatch select_batch(int round, const Transcript& history) override;
  LearnerOutput output(const Transcript& history) override;

  const SolverState& state() const { return st_; }

 private:
  void catch_up(const Transcript& history);

  SolverState st_;
  double gamma_;
  std::size_t absorbed_ = 0;
};

enum class BaselineKind { kRandomUnit, kCoordinate, kGreedyOrthogonal };

// Non-adaptive and mildly adaptive batch strategies used to drive the
// adversary games. All of them query at the start state and make no serious
// use of rewards; their outputs are the uninformed defaults (theta = 0 for
// PE, first action e1 for BPI).
//   random_unit:       n_k Haar-random unit actions, seeded per round.
//   coordinate:        standard basis vectors in index order, cycling across
//                      rounds (the cursor is the number of queries so far).
//   greedy_orthogonal: unit actions drawn inside the span revealed by the
//                      previous round's policy evaluations (successors for
//                      BPI sessions), falling back to the full space.
class BaselineLearner : public Learner {
 public:
  BaselineLearner(BaselineKind kind, Family problem, int d, std::vector<int> n_per_round,
                  std::uint64_t seed);

  QueryBatch select_batch(int round, const Transcript& history) override;
  LearnerOutput output(const Transcript& history) override;

 private:
  BaselineKind kind_;
  Family problem_;
  int d_;
  std::vector<int> n_per_round_;
  std::uint64_t seed_;
};

// PE-only learner that probes with policy-induced triples: seeded start
// points, a fixed seeded rotation as the policy, trajectory lengths cycling
// through 1..3. With submit_induced=false it pre-expands the same triples
// under the PE dynamics (successor = action) and submits them policy-free;
// both modes generate identical feedback.
class PolicyInducedProbeLearner : public Learner {
 public:
  PolicyInducedProbeLearner(int d, std::vector<int> n_per_round, std::uint64_t seed,
                            bool submit_induced);

  QueryBatch select_batch(int round, const Transcript& history) override;
  LearnerOutput output(const Transcript& history) override;

 private:
  std::vector<InducedQuery> round_triples(int round) const;

  int d_;
  std::vector<int> n_per_round_;
  std::uint64_t seed_;
  bool submit_induced_;
  Eigen::MatrixXd rotation_;
};

// Factory keyed by the CLI learner_kind strings: exact_solver, random_unit,
// coordinate, greedy_orthogonal, policy_probe. submit_induced only affects
// policy_probe. Throws ConfigError for unknown kinds or kind/problem
// mismatches (the solver and the probe are PE-only).
std::unique_ptr<Learner> make_learner(const std::string& kind, Family problem, int d, double gamma,
                                      std::vector<int> n_per_round, std::uint64_t seed,
                                      bool submit_induced);

}  // namespace batchbound
