#include "batchbound/adversary.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

#include "batchbound/errors.hpp"
#include "batchbound/exact_unit.hpp"
#include "batchbound/rng.hpp"

namespace batchbound {

AdversaryDefeated::AdversaryDefeated(int round, std::vector<StateAction> offending)
    : std::runtime_error("adversary defeated in round " + std::to_string(round)),
      round_(round),
      offending_(std::move(offending)) {}

DimSchedule fully_adaptive_schedule(int d) {
  if (d < 2) throw ConfigError("fully_adaptive_schedule: d must be >= 2");
  DimSchedule s;
  s.d_plus = d;
  s.dims.reserve(static_cast<std::size_t>(d - 1));
  for (int k = 1; k < d; ++k) s.dims.push_back(d - k);
  return s;
}

DimSchedule multi_batch_schedule(int d, int K, bool theoretical) {
  if (d < 2) throw ConfigError("multi_batch_schedule: d must be >= 2");
  if (K < 1) throw ConfigError("multi_batch_schedule: K must be >= 1");
  DimSchedule s;
  if (theoretical) {
    // Largest power of two that fits, then dims 2^ceil(N / 4^k).
    int n = 0;
    while ((std::int64_t{2} << n) <= d) ++n;
    s.d_plus = 1 << n;
    std::int64_t pow4 = 1;
    for (int k = 1; k <= K; ++k) {
      if (pow4 <= n) pow4 *= 4;
      int e = pow4 >= n ? 1 : static_cast<int>((n + pow4 - 1) / pow4);
      s.dims.push_back(1 << e);
    }
  } else {
    s.d_plus = d;
    for (int k = 1; k <= K; ++k) {
      int raw = k < 31 ? (d >> k) : 0;
      s.dims.push_back(raw < 1 ? 1 : raw);
      if (raw < 1) s.clamped = true;
    }
  }
  for (std::size_t i = 1; i < s.dims.size(); ++i)
    if (s.dims[i] >= s.dims[i - 1]) s.clamped = true;
  return s;
}

AdversaryState make_adversary(Family family, int d, double gamma, int K, AdversaryMode mode,
                              bool theoretical, std::uint64_t seed,
                              const std::optional<std::vector<int>>& custom_dims) {
  if (d < 2) throw ConfigError("make_adversary: d must be >= 2");
  if (K < 1) throw ConfigError("make_adversary: K must be >= 1");
  if (!(gamma > std::sqrt(3.0 / 4.0) && gamma < 1.0))
    throw ConfigError("make_adversary: gamma must lie in (sqrt(3/4), 1)");
  AdversaryState st;
  st.d = d;
  st.gamma = gamma;
  st.family = family;
  st.mode = mode;
  st.theoretical = theoretical;
  st.seed = seed;
  if (mode == AdversaryMode::kFullyAdaptive) {
    if (custom_dims)
      throw ConfigError("make_adversary: custom dims apply to multi-batch mode only");
    if (theoretical)
      throw ConfigError("make_adversary: the power-of-two schedule applies to multi-batch mode only");
    st.schedule = fully_adaptive_schedule(d);
  } else if (custom_dims) {
    if (static_cast<int>(custom_dims->size()) != K)
      throw ConfigError("make_adversary: need one target dimension per round");
    int prev = d;
    for (int m : *custom_dims) {
      if (m < 1 || m >= prev)
        throw ConfigError("make_adversary: custom dims must decrease strictly, starting below d");
      prev = m;
    }
    st.schedule.dims = *custom_dims;
    st.schedule.d_plus = d;
  } else {
    st.schedule = multi_batch_schedule(d, K, theoretical);
  }
  return st;
}

std::vector<FeedbackRecord> respond_batch(AdversaryState& state, const QueryBatch& batch) {
  batch.validate();
  if (!batch.induced.empty())
    throw ConfigError("respond_batch: policy-induced batches must be expanded first");
  const int round = batch.round;
  if (round != state.chain_so_far.committed_upto + 1)
    throw ConfigError("respond_batch: expected round " +
                      std::to_string(state.chain_so_far.committed_upto + 1));
  for (const StateAction& sa : batch.queries)
    if (sa.state.dim() != state.d || sa.action.dim() != state.d)
      throw ConfigError("respond_batch: query dimension mismatch");

  // Only the new actions constrain the search: every earlier action already
  // evades the current innermost subspace, and shrinking the subspace can
  // only shrink its sector.
  std::vector<Eigen::VectorXd> new_actions;
  new_actions.reserve(batch.queries.size());
  for (const StateAction& sa : batch.queries) new_actions.push_back(sa.action.coords());

  const bool first = state.chain_so_far.depth() == 0;
  const bool use_root = first && state.theoretical && state.schedule.d_plus < state.d;
  Subspace container =
      first ? (use_root ? Subspace::from_orthonormal(
                              Eigen::MatrixXd::Identity(state.d, state.schedule.d_plus))
                        : Subspace::full(state.d))
            : state.chain_so_far.subspaces.back();

  std::optional<Subspace> committed;
  if (state.mode == AdversaryMode::kFullyAdaptive) {
    committed = restrict_and_lift(
        container, new_actions,
        [&](const std::vector<Eigen::VectorXd>& restricted) -> std::optional<Subspace> {
          try {
            return orthonormal_complement_basis(restricted, container.dim());
          } catch (const std::invalid_argument&) {
            return std::nullopt;  // the new actions span the whole container
          }
        });
  } else {
    if (round > static_cast<int>(state.schedule.dims.size()))
      throw ConfigError("respond_batch: no scheduled dimension for round " + std::to_string(round));
    const int m = state.schedule.dims[static_cast<std::size_t>(round - 1)];
    if (m > container.dim())
      throw ConfigError("respond_batch: scheduled dimension exceeds the current subspace");
    EvasionSearchOptions opts;
    opts.seed = mix_seed(state.seed, static_cast<std::uint64_t>(round));
    committed = restrict_and_lift(
        container, new_actions, [&](const std::vector<Eigen::VectorXd>& restricted) {
          return find_evading_subspace(restricted, container.dim(), m, state.gamma, opts);
        });
  }
  if (!committed) throw AdversaryDefeated(round, batch.queries);

  state.chain_so_far.subspaces.push_back(*committed);
  state.chain_so_far.committed_upto = round;
  state.chain_so_far.validate();

  // Every action ever queried must stay outside the new sector.
  const Subspace& bk = state.chain_so_far.subspaces.back();
  auto assert_evaded = [&](const StateAction& sa) {
    if (sector_contains(bk, state.gamma, sa.action.coords()))
      throw InvariantBreach("respond_batch: committed subspace fails to evade a query");
  };
  for (const Transcript::Entry& e : state.history.batches)
    for (const FeedbackRecord& r : e.records) assert_evaded(r.query);
  for (const StateAction& sa : batch.queries) assert_evaded(sa);

  // Feedback from committed structure only: zero reward, successor one chain
  // level deeper. No sign is consulted, so none leaks.
  std::vector<FeedbackRecord> records;
  records.reserve(batch.queries.size());
  for (const StateAction& sa : batch.queries) {
    Eigen::VectorXd mapped = chain_case_map(state.chain_so_far, state.gamma, sa.action.coords());
    if (state.family == Family::PE) {
      records.push_back(FeedbackRecord{sa, 0.0, sa.action, BallVector(std::move(mapped)), true});
    } else {
      records.push_back(FeedbackRecord{sa, 0.0, BallVector(std::move(mapped)), std::nullopt, true});
    }
  }
  state.history.append(batch, records);
  return records;
}

IndistinguishabilityCertificate finalize(const AdversaryState& state) {
  if (state.chain_so_far.depth() < 1)
    throw ConfigError("finalize: nothing committed yet");
  const Subspace& innermost = state.chain_so_far.subspaces.back();

  NestedChain chain = state.chain_so_far;
  chain.w = exact_unit(innermost.basis().col(0));

  IndistinguishabilityCertificate cert{HardInstance{state.family, state.gamma, +1, chain},
                                       HardInstance{state.family, state.gamma, -1, chain},
                                       state.history, 0.0, false};
  cert.instance_plus.validate();
  cert.instance_minus.validate();

  if (!replay_matches(cert.instance_plus, state.history) ||
      !replay_matches(cert.instance_minus, state.history))
    throw InvariantBreach("finalize: consistency breach, recorded feedback is not reproduced");
  cert.replay_match = true;

  const StateAction probe{State::start(state.d), BallVector(*chain.w)};
  cert.q_gap = std::abs(true_q(cert.instance_plus, probe) - true_q(cert.instance_minus, probe));
  return cert;
}

HardInstance commit_truthfully(const AdversaryState& state) {
  NestedChain chain = state.chain_so_far;
  chain.w = chain.depth() > 0 ? exact_unit(chain.subspaces.back().basis().col(0))
                              : exact_unit(Eigen::VectorXd::Unit(state.d, 0));
  HardInstance inst{state.family, state.gamma, +1, chain};
  inst.validate();
  if (!replay_matches(inst, state.history))
    throw InvariantBreach("commit_truthfully: consistency breach against recorded feedback");
  return inst;
}

AdversaryEnvironment::AdversaryEnvironment(AdversaryState initial) : state_(std::move(initial)) {}

std::vector<FeedbackRecord> AdversaryEnvironment::answer_batch(
    int round, const std::vector<StateAction>& queries) {
  if (committed_) return feedback_for(*committed_, queries);
  QueryBatch batch;
  batch.round = round;
  batch.queries = queries;
  try {
    return respond_batch(state_, batch);
  } catch (const AdversaryDefeated& defeat) {
    defeated_ = true;
    defeat_round_ = defeat.round();
    offending_ = defeat.offending();
    committed_ = commit_truthfully(state_);
    return feedback_for(*committed_, queries);
  }
}

State AdversaryEnvironment::advance(const StateAction& sa) {
  if (state_.family != Family::PE)
    throw ConfigError("AdversaryEnvironment: trajectory expansion needs the PE family");
  return State::at(sa.action);
}

Policy AdversaryEnvironment::reveal_target_policy() {
  if (state_.family != Family::PE)
    throw ConfigError("AdversaryEnvironment: only PE sessions reveal a target policy");
  if (committed_) return canonical_policy(*committed_);
  // The target policy never reads the sign, so revealing it commits nothing.
  return canonical_policy(certificate().instance_plus);
}

const HardInstance& AdversaryEnvironment::committed_instance() const {
  if (!committed_) throw ConfigError("AdversaryEnvironment: no commitment, the adversary survived");
  return *committed_;
}

const IndistinguishabilityCertificate& AdversaryEnvironment::certificate() {
  if (defeated_)
    throw ConfigError("AdversaryEnvironment: defeated sessions end with a commitment, not a certificate");
  if (!cert_) cert_ = finalize(state_);
  return *cert_;
}

}  // namespace batchbound
