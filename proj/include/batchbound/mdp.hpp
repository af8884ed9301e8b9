#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "batchbound/geometry.hpp"

namespace batchbound {

enum class Family { PE, BPI };

// MDP state: either the distinguished start state or a point of the ball.
// The policy-evaluation family identifies the start state with the origin;
// the policy-identification family keeps it disjoint from the ball.
class State {
 public:
  static State start(int d);
  static State at(BallVector v);

  bool is_start() const { return is_start_; }
  int dim() const { return dim_; }
  // Coordinates; the start state maps to the origin (valid for family PE).
  const Eigen::VectorXd& point() const { return point_.coords(); }

  bool operator==(const State& o) const {
    return is_start_ == o.is_start_ && dim_ == o.dim_ &&
           (is_start_ || point_.coords() == o.point_.coords());
  }

 private:
  State(bool is_start, int dim, BallVector point)
      : is_start_(is_start), dim_(dim), point_(std::move(point)) {}
  bool is_start_;
  int dim_;
  BallVector point_;
};

struct StateAction {
  State state;
  BallVector action;

  bool operator==(const StateAction& o) const {
    return state == o.state && action.coords() == o.action.coords();
  }
};

// Strictly nested sequence B_1 .. B_L of subspaces with an optional reward
// direction w inside the innermost one. While the environment is still
// committing lazily, only a prefix exists and w is absent.
struct NestedChain {
  std::vector<Subspace> subspaces;
  std::optional<Eigen::VectorXd> w;
  int committed_upto = 0;

  int depth() const { return static_cast<int>(subspaces.size()); }
  int ambient_dim() const;
  // Checks nesting within 1e-9, nonincreasing dimensions, w membership and
  // unit norm when present, committed_upto consistency.
  void validate() const;
};

// Where a ball point falls in the nested case analysis.
struct RegionInfo {
  enum Kind { kCap, kRing, kShell } kind = kShell;
  int shell = 0;  // deepest chain level whose sector holds the point (kShell)
};

// Classify x against the chain: caps around +-w first, then the sector of
// the w line, then the deepest subspace sector, defaulting to shell 0.
RegionInfo classify_region(const NestedChain& chain, double gamma, const Eigen::VectorXd& x);

// The three-case map driving both the target policy (family PE) and the
// transition function (family BPI): identity on the caps, (1/gamma) times the
// projection one level deeper everywhere else. Throws InvariantBreach if x
// sits in the innermost committed sector of a chain with no w yet (the lazy
// environment must never let that happen).
Eigen::VectorXd chain_case_map(const NestedChain& chain, double gamma, const Eigen::VectorXd& x);

struct HardInstance {
  Family family = Family::PE;
  double gamma = 0.0;
  int sign = +1;
  NestedChain chain;  // fully committed, w present

  int d() const { return chain.ambient_dim(); }
  const Eigen::VectorXd& w() const { return *chain.w; }
  void validate() const;
};

// Reward is zero outside the two caps around +-w; inside it is
// sign * (1 - gamma) * a^T w.
double reward(const HardInstance& inst, const StateAction& sa);

// Deterministic successor: family PE moves to the action itself; family BPI
// runs the action through the case map.
BallVector successor(const HardInstance& inst, const StateAction& sa);

// Target policy of the PE family (case map applied to the state).
BallVector target_policy_action(const HardInstance& inst, const State& s);

// Q(s, a) = sign * a^T w for both families.
double true_q(const HardInstance& inst, const StateAction& sa);

using Policy = std::function<BallVector(const State&)>;
using QFunction = std::function<double(const State&, const BallVector&)>;

// Target policy for PE; for BPI the forced action at ball states and the
// optimal first action sign * w at the start state.
Policy canonical_policy(const HardInstance& inst);

// reward(sa) + gamma * qfun(s', policy(s')).
double bellman_apply(const HardInstance& inst, const Policy& policy, const QFunction& qfun,
                     const StateAction& sa);

// State-actions covering every case branch: both caps, the w-line ring, and
// each nonempty shell, padded with uniform ball points.
std::vector<StateAction> stratified_state_actions(const HardInstance& inst, int count,
                                                  std::uint64_t seed);

struct RealizabilityReport {
  double max_residual = 0.0;
  bool pass = false;
  int samples = 0;
};

// Max |T Q - Q| over a stratified sample, Q the closed-form Q-function and T
// the Bellman operator under the canonical policy. Passes at 1e-9.
RealizabilityReport verify_realizability(const HardInstance& inst, int samples, std::uint64_t seed);

int default_horizon(double gamma);  // ceil(log 1e-9 / log gamma)

// Truncated deterministic rollout value from s0; the tail is bounded by
// gamma^horizon.
double value_of_policy(const HardInstance& inst, const Policy& policy, const State& s0, int horizon);

// Random fully-committed instance: nested chain of `depth` subspaces with
// strictly decreasing dimensions where possible, w drawn inside the innermost
// and exactified to unit norm.
HardInstance random_hard_instance(Family family, int d, double gamma, int sign, int depth,
                                  std::uint64_t seed);

}  // namespace batchbound
