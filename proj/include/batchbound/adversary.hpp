#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "batchbound/packing.hpp"
#include "batchbound/protocol.hpp"

namespace batchbound {

// The learner's queries could not be evaded at the scheduled dimension. This
// is a first-class game outcome (evidence the query budget sufficed), not a
// bug; the environment wrapper catches it, commits truthfully and plays on.
class AdversaryDefeated : public std::runtime_error {
 public:
  AdversaryDefeated(int round, std::vector<StateAction> offending);

  int round() const { return round_; }
  const std::vector<StateAction>& offending() const { return offending_; }

 private:
  int round_;
  std::vector<StateAction> offending_;
};

enum class AdversaryMode { kMultiBatch, kFullyAdaptive };

// Target dimension per round plus how it was derived.
struct DimSchedule {
  std::vector<int> dims;
  int d_plus = 0;      // power-of-two root dimension (= d outside theoretical mode)
  bool clamped = false;  // hit the floor of 1 or stopped strictly decreasing
};

// One dimension drop per query: dim B_k = d - k for k = 1..d-1. The realized
// dimensions can stay higher when queries are linearly dependent; the
// schedule entries are the generic-position values.
DimSchedule fully_adaptive_schedule(int d);

// theoretical=true: dim B_k = 2^ceil(N / 4^k) inside the power-of-two root
// d_plus = 2^N <= d (the proof-faithful schedule; its constants bite only at
// astronomical d, and repeated trailing dims are flagged as clamped).
// theoretical=false: the desk-scale geometric halving max(1, d >> k).
DimSchedule multi_batch_schedule(int d, int K, bool theoretical);

// Lazily committing environment state. After round k the chain holds
// B_1 .. B_k and every recorded query action lies outside sector(B_k, gamma).
struct AdversaryState {
  int d = 0;
  double gamma = 0.0;
  Family family = Family::PE;
  NestedChain chain_so_far;  // committed_upto == rounds committed, no w yet
  Transcript history;
  AdversaryMode mode = AdversaryMode::kMultiBatch;
  DimSchedule schedule;
  bool theoretical = false;  // restrict round 1 to the d_plus coordinate root
  std::uint64_t seed = 0;
};

// Validated initial state. custom_dims (multi-batch only) overrides the
// schedule and must be strictly decreasing with dims[0] < d.
AdversaryState make_adversary(Family family, int d, double gamma, int K, AdversaryMode mode,
                              bool theoretical, std::uint64_t seed,
                              const std::optional<std::vector<int>>& custom_dims = std::nullopt);

// Answer one policy-free batch: find a subspace of the scheduled dimension
// inside the current innermost one whose sector evades every new query
// (orthogonal complement in fully-adaptive mode, guided search otherwise),
// commit it, and emit feedback computed from committed structure only: zero
// rewards and (1/gamma)-projections one chain level deeper. Appends to
// state.history. Throws AdversaryDefeated when no evading subspace exists or
// the search budget runs out, and InvariantBreach if a committed subspace
// ever fails the evasion re-check.
std::vector<FeedbackRecord> respond_batch(AdversaryState& state, const QueryBatch& batch);

// The two-instance witness produced at the end of a session the adversary
// survived: the same transcript is exactly reproduced by both signings, yet
// their Q-values at w differ by 2.
struct IndistinguishabilityCertificate {
  HardInstance instance_plus;
  HardInstance instance_minus;
  Transcript transcript;
  double q_gap = 0.0;
  bool replay_match = false;
};

// Pick w inside the innermost committed subspace (first basis column,
// exactified to unit norm), build both signed instances, and prove the replay
// property record-for-record. A replay mismatch is a consistency breach and
// throws InvariantBreach; q_gap is exactly 2 by the bit-exact normalization
// of w.
IndistinguishabilityCertificate finalize(const AdversaryState& state);

// The honest commitment taken when the adversary is defeated mid-session:
// same w rule as finalize (e1 for an empty chain), sign fixed to +1. The
// prior history must replay exactly against the result (guaranteed because w
// stays inside the innermost committed subspace); a mismatch throws
// InvariantBreach.
HardInstance commit_truthfully(const AdversaryState& state);

// Protocol environment wrapping the adversary. Survived sessions end in an
// indistinguishability certificate (built lazily at reveal time or on
// demand); a defeat flips the environment into truthful fixed-instance play
// for the rest of the session and is reported through defeated().
class AdversaryEnvironment : public Environment {
 public:
  explicit AdversaryEnvironment(AdversaryState initial);

  int dim() const override { return state_.d; }
  double discount() const override { return state_.gamma; }
  Family family() const override { return state_.family; }
  std::vector<FeedbackRecord> answer_batch(int round,
                                           const std::vector<StateAction>& queries) override;
  // PE dynamics are class knowledge (successor = action); BPI sessions have
  // no commitment-free dynamics to expand against and refuse.
  State advance(const StateAction& sa) override;
  Policy reveal_target_policy() override;

  bool defeated() const { return defeated_; }
  int defeat_round() const { return defeat_round_; }
  const std::vector<StateAction>& offending_queries() const { return offending_; }
  // Fixed instance played after a defeat; ConfigError if never defeated.
  const HardInstance& committed_instance() const;
  // Certificate of a survived session; ConfigError on the defeat path.
  const IndistinguishabilityCertificate& certificate();
  const AdversaryState& state() const { return state_; }

 private:
  AdversaryState state_;
  std::optional<HardInstance> committed_;
  std::optional<IndistinguishabilityCertificate> cert_;
  bool defeated_ = false;
  int defeat_round_ = 0;
  std::vector<StateAction> offending_;
};

}  // namespace batchbound
