#include "batchbound/learner.hpp"

#include <cmath>
#include <limits>
#include <utility>

#include "batchbound/errors.hpp"
#include "batchbound/rng.hpp"

namespace batchbound {

namespace {

Eigen::MatrixXd stack_rows(const std::vector<Eigen::VectorXd>& rows, int d) {
  Eigen::MatrixXd m(static_cast<int>(rows.size()), d);
  for (int i = 0; i < m.rows(); ++i) m.row(i) = rows[static_cast<std::size_t>(i)];
  return m;
}

}  // namespace

double residual_min_singular(const SolverState& st) {
  if (st.residuals.empty()) return std::numeric_limits<double>::infinity();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(stack_rows(st.residuals, st.d));
  return svd.singularValues().minCoeff();
}

StateAction next_query(const SolverState& st) {
  if (st.d < 1) throw ConfigError("next_query: solver has no dimension");
  if (static_cast<int>(st.residuals.size()) >= st.d)
    throw InvariantBreach("next_query: residuals already span the space");
  Eigen::VectorXd probe;
  try {
    probe = orthonormal_complement_basis(st.residuals, st.d).basis().col(0);
  } catch (const std::invalid_argument&) {
    // Numerically full span with fewer than d rows: the environment broke the
    // independence guarantee somewhere upstream.
    throw InvariantBreach("next_query: residuals already span the space");
  }
  return StateAction{State::start(st.d), BallVector(std::move(probe))};
}

void absorb_feedback(SolverState& st, const FeedbackRecord& fb, double gamma,
                     const Eigen::VectorXd& policy_eval) {
  if (policy_eval.size() != st.d)
    throw ConfigError("absorb_feedback: policy evaluation dimension mismatch");
  Eigen::VectorXd v = fb.query.action.coords() - gamma * policy_eval;

  SolverState candidate = st;
  candidate.residuals.push_back(v);
  if (residual_min_singular(candidate) <= kIndependenceTol)
    throw InvariantBreach(
        "absorb_feedback: dependent residual; the environment violated the feature assumption");

  st.residuals.push_back(std::move(v));
  st.rewards.push_back(fb.reward);
}

Eigen::VectorXd solve(const SolverState& st) {
  if (static_cast<int>(st.residuals.size()) != st.d)
    throw ConfigError("solve: need exactly d residuals");
  Eigen::MatrixXd v = stack_rows(st.residuals, st.d);
  Eigen::VectorXd r = Eigen::Map<const Eigen::VectorXd>(st.rewards.data(), st.d);

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(v);
  double smin = svd.singularValues().minCoeff();
  double smax = svd.singularValues().maxCoeff();
  if (smin <= 0.0 || smax / smin > kConditionLimit)
    throw InvariantBreach("solve: system is ill-conditioned");

  Eigen::VectorXd theta = v.colPivHouseholderQr().solve(r);
  if ((v * theta - r).norm() > 1e-9) throw InvariantBreach("solve: residual above tolerance");
  return theta;
}

Eigen::VectorXd solve_truncated(const SolverState& st) {
  if (st.residuals.empty()) return Eigen::VectorXd::Zero(st.d);
  Eigen::MatrixXd v = stack_rows(st.residuals, st.d);
  Eigen::VectorXd r =
      Eigen::Map<const Eigen::VectorXd>(st.rewards.data(), static_cast<int>(st.rewards.size()));
  return v.completeOrthogonalDecomposition().solve(r);
}

ExactSolverLearner::ExactSolverLearner(int d, double gamma) : gamma_(gamma) {
  if (d < 1) throw ConfigError("ExactSolverLearner: d must be >= 1");
  st_.d = d;
}

void ExactSolverLearner::catch_up(const Transcript& history) {
  std::vector<FeedbackRecord> records = history.all_records();
  for (std::size_t i = absorbed_; i < records.size(); ++i) {
    if (!records[i].policy_eval)
      throw ConfigError("ExactSolverLearner: PE feedback with policy evaluations is required");
    absorb_feedback(st_, records[i], gamma_, records[i].policy_eval->coords());
    ++absorbed_;
  }
}

QueryBatch ExactSolverLearner::select_batch(int round, const Transcript& history) {
  catch_up(history);
  QueryBatch b;
  b.round = round;
  b.queries.push_back(next_query(st_));
  return b;
}

LearnerOutput ExactSolverLearner::output(const Transcript& history) {
  catch_up(history);
  LearnerOutput out;
  out.theta = static_cast<int>(st_.residuals.size()) == st_.d ? solve(st_) : solve_truncated(st_);
  return out;
}

BaselineLearner::BaselineLearner(BaselineKind kind, Family problem, int d,
                                 std::vector<int> n_per_round, std::uint64_t seed)
    : kind_(kind), problem_(problem), d_(d), n_per_round_(std::move(n_per_round)), seed_(seed) {
  if (d_ < 1) throw ConfigError("BaselineLearner: d must be >= 1");
  for (int n : n_per_round_)
    if (n < 1) throw ConfigError("BaselineLearner: batch sizes must be >= 1");
}

QueryBatch BaselineLearner::select_batch(int round, const Transcript& history) {
  if (round < 1 || round > static_cast<int>(n_per_round_.size()))
    throw ConfigError("BaselineLearner: round outside the configured schedule");
  int n = n_per_round_[static_cast<std::size_t>(round - 1)];
  QueryBatch b;
  b.round = round;
  State sbar = State::start(d_);

  switch (kind_) {
    case BaselineKind::kRandomUnit: {
      std::mt19937_64 eng = make_engine(seed_, static_cast<std::uint64_t>(round));
      for (int i = 0; i < n; ++i)
        b.queries.push_back(StateAction{sbar, BallVector(random_unit_vector(d_, eng))});
      break;
    }
    case BaselineKind::kCoordinate: {
      // Cursor = queries issued so far, so the cycle continues across rounds.
      int cursor = history.n_total;
      for (int i = 0; i < n; ++i) {
        int axis = (cursor + i) % d_;
        b.queries.push_back(StateAction{sbar, BallVector(Eigen::VectorXd::Unit(d_, axis))});
      }
      break;
    }
    case BaselineKind::kGreedyOrthogonal: {
      // The previous round's evaluations reveal projections into the
      // adversary's committed subspace; keep probing inside their span. With
      // nothing revealed yet (round 1, or all projections zero) fall back to
      // the full space.
      std::vector<Eigen::VectorXd> revealed;
      if (!history.batches.empty()) {
        for (const FeedbackRecord& r : history.batches.back().records) {
          const Eigen::VectorXd& v =
              r.policy_eval ? r.policy_eval->coords() : r.successor.coords();
          if (v.norm() > kDropTol) revealed.push_back(v);
        }
      }
      std::mt19937_64 eng = make_engine(seed_, static_cast<std::uint64_t>(round));
      if (revealed.empty()) {
        for (int i = 0; i < n; ++i)
          b.queries.push_back(StateAction{sbar, BallVector(random_unit_vector(d_, eng))});
      } else {
        Subspace target = Subspace::span_of(revealed, d_);
        for (int i = 0; i < n; ++i) {
          Eigen::VectorXd inside = target.basis() * random_unit_vector(target.dim(), eng);
          b.queries.push_back(StateAction{sbar, BallVector::unit(inside)});
        }
      }
      break;
    }
  }
  return b;
}

LearnerOutput BaselineLearner::output(const Transcript&) {
  LearnerOutput out;
  if (problem_ == Family::PE)
    out.theta = Eigen::VectorXd::Zero(d_);
  else
    out.first_action = BallVector(Eigen::VectorXd::Unit(d_, 0));
  return out;
}

PolicyInducedProbeLearner::PolicyInducedProbeLearner(int d, std::vector<int> n_per_round,
                                                     std::uint64_t seed, bool submit_induced)
    : d_(d), n_per_round_(std::move(n_per_round)), seed_(seed), submit_induced_(submit_induced) {
  if (d_ < 1) throw ConfigError("PolicyInducedProbeLearner: d must be >= 1");
  // A fixed rotation keeps trajectories on distinct points of the sphere of
  // the start radius; norms never grow, so every visited state is in the
  // ball.
  std::mt19937_64 eng = make_engine(seed_, 0);
  Eigen::MatrixXd g(d_, d_);
  for (int i = 0; i < d_; ++i) g.col(i) = gaussian_vector(d_, eng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  rotation_ = qr.householderQ();
}

std::vector<InducedQuery> PolicyInducedProbeLearner::round_triples(int round) const {
  if (round < 1 || round > static_cast<int>(n_per_round_.size()))
    throw ConfigError("PolicyInducedProbeLearner: round outside the configured schedule");
  int n = n_per_round_[static_cast<std::size_t>(round - 1)];
  std::mt19937_64 eng = make_engine(seed_, static_cast<std::uint64_t>(round));
  Eigen::MatrixXd rot = rotation_;
  Policy pi = [rot](const State& s) { return BallVector(rot * s.point()); };
  std::vector<InducedQuery> triples;
  for (int i = 0; i < n; ++i) {
    State s0 = State::at(BallVector(random_ball_point(d_, eng)));
    triples.push_back(InducedQuery{s0, pi, 1 + i % 3});
  }
  return triples;
}

QueryBatch PolicyInducedProbeLearner::select_batch(int round, const Transcript&) {
  QueryBatch b;
  b.round = round;
  if (submit_induced_) {
    b.induced = round_triples(round);
  } else {
    // PE dynamics are class knowledge: the successor is the queried action,
    // so the learner can expand its own triples and submit them policy-free.
    b.queries = expand_policy_induced_with(
        [](const StateAction& sa) { return State::at(sa.action); }, round_triples(round));
  }
  return b;
}

LearnerOutput PolicyInducedProbeLearner::output(const Transcript&) {
  LearnerOutput out;
  out.theta = Eigen::VectorXd::Zero(d_);
  return out;
}

std::unique_ptr<Learner> make_learner(const std::string& kind, Family problem, int d, double gamma,
                                      std::vector<int> n_per_round, std::uint64_t seed,
                                      bool submit_induced) {
  if (kind == "exact_solver") {
    if (problem != Family::PE) throw ConfigError("make_learner: exact_solver is PE-only");
    return std::make_unique<ExactSolverLearner>(d, gamma);
  }
  if (kind == "random_unit")
    return std::make_unique<BaselineLearner>(BaselineKind::kRandomUnit, problem, d,
                                             std::move(n_per_round), seed);
  if (kind == "coordinate")
    return std::make_unique<BaselineLearner>(BaselineKind::kCoordinate, problem, d,
                                             std::move(n_per_round), seed);
  if (kind == "greedy_orthogonal")
    return std::make_unique<BaselineLearner>(BaselineKind::kGreedyOrthogonal, problem, d,
                                             std::move(n_per_round), seed);
  if (kind == "policy_probe") {
    if (problem != Family::PE) throw ConfigError("make_learner: policy_probe is PE-only");
    return std::make_unique<PolicyInducedProbeLearner>(d, std::move(n_per_round), seed,
                                                       submit_induced);
  }
  throw ConfigError("make_learner: unknown learner kind '" + kind + "'");
}

}  // namespace batchbound
