#include "batchbound/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "batchbound/errors.hpp"
#include "batchbound/exact_unit.hpp"
#include "batchbound/rng.hpp"

namespace batchbound {

State State::start(int d) { return State(true, d, BallVector::zero(d)); }

State State::at(BallVector v) {
  int d = v.dim();
  return State(false, d, std::move(v));
}

int NestedChain::ambient_dim() const {
  if (!subspaces.empty()) return subspaces.front().ambient_dim();
  if (w) return static_cast<int>(w->size());
  throw std::invalid_argument("NestedChain: empty chain has no dimension");
}

void NestedChain::validate() const {
  if (committed_upto < 0 || committed_upto > depth())
    throw std::invalid_argument("NestedChain: committed_upto out of range");
  for (int k = 1; k < depth(); ++k) {
    if (subspaces[k].dim() > subspaces[k - 1].dim())
      throw std::invalid_argument("NestedChain: dimensions must be nonincreasing");
    if (!subspaces[k - 1].contains_subspace(subspaces[k], kGeomTol))
      throw std::invalid_argument("NestedChain: chain is not nested");
  }
  if (w) {
    if (std::abs(w->norm() - 1.0) > kGeomTol)
      throw std::invalid_argument("NestedChain: w must be unit norm");
    if (!subspaces.empty() && !subspaces.back().contains(*w, kGeomTol))
      throw std::invalid_argument("NestedChain: w must lie in the innermost subspace");
  }
}

void HardInstance::validate() const {
  chain.validate();
  if (!chain.w) throw std::invalid_argument("HardInstance: chain has no reward direction");
  if (sign != 1 && sign != -1) throw std::invalid_argument("HardInstance: sign must be +-1");
  if (!(gamma > std::sqrt(3.0 / 4.0) && gamma < 1.0))
    throw std::invalid_argument("HardInstance: gamma must lie in (sqrt(3/4), 1)");
}

RegionInfo classify_region(const NestedChain& chain, double gamma, const Eigen::VectorXd& x) {
  if (chain.w) {
    if (cap_contains(*chain.w, gamma, x) || cap_contains(-*chain.w, gamma, x))
      return {RegionInfo::kCap, 0};
    if (sector_contains(Subspace::line(*chain.w), gamma, x)) return {RegionInfo::kRing, 0};
  }
  for (int j = chain.depth(); j >= 1; --j)
    if (sector_contains(chain.subspaces[j - 1], gamma, x)) return {RegionInfo::kShell, j};
  return {RegionInfo::kShell, 0};
}

Eigen::VectorXd chain_case_map(const NestedChain& chain, double gamma, const Eigen::VectorXd& x) {
  RegionInfo region = classify_region(chain, gamma, x);
  if (region.kind == RegionInfo::kCap) return x;
  if (region.kind == RegionInfo::kShell && region.shell < chain.depth())
    return (1.0 / gamma) * chain.subspaces[region.shell].project(x);
  // Ring, or the sector of the innermost subspace: one level deeper is the
  // w line itself.
  if (!chain.w)
    throw InvariantBreach(
        "chain case map: point reached the innermost sector before the chain was extended");
  const Eigen::VectorXd& w = *chain.w;
  return (1.0 / gamma) * (w * w.dot(x));
}

double reward(const HardInstance& inst, const StateAction& sa) {
  const Eigen::VectorXd& a = sa.action.coords();
  if (cap_contains(inst.w(), inst.gamma, a) || cap_contains(-inst.w(), inst.gamma, a))
    return inst.sign * (1.0 - inst.gamma) * a.dot(inst.w());
  return 0.0;
}

BallVector successor(const HardInstance& inst, const StateAction& sa) {
  if (inst.family == Family::PE) return sa.action;
  return BallVector(chain_case_map(inst.chain, inst.gamma, sa.action.coords()));
}

BallVector target_policy_action(const HardInstance& inst, const State& s) {
  if (inst.family != Family::PE)
    throw std::invalid_argument("target_policy_action: only family PE has a target policy");
  return BallVector(chain_case_map(inst.chain, inst.gamma, s.point()));
}

double true_q(const HardInstance& inst, const StateAction& sa) {
  return inst.sign * sa.action.coords().dot(inst.w());
}

Policy canonical_policy(const HardInstance& inst) {
  if (inst.family == Family::PE) {
    return [inst](const State& s) { return target_policy_action(inst, s); };
  }
  return [inst](const State& s) {
    if (s.is_start()) return BallVector(inst.sign * inst.w());
    return BallVector(s.point());  // ball states force their own point
  };
}

double bellman_apply(const HardInstance& inst, const Policy& policy, const QFunction& qfun,
                     const StateAction& sa) {
  State next = State::at(successor(inst, sa));
  BallVector next_action = policy(next);
  return reward(inst, sa) + inst.gamma * qfun(next, next_action);
}

namespace {

Eigen::VectorXd unit_inside(const Subspace& S, std::mt19937_64& eng) {
  Eigen::VectorXd v = S.basis() * gaussian_vector(S.dim(), eng);
  if (v.norm() < 1e-12) v = S.basis().col(0);
  return v / v.norm();
}

// Unit vector of S orthogonal to T; T must be nested in S with smaller dim.
std::optional<Eigen::VectorXd> unit_inside_minus(const Subspace& S, const Subspace& T,
                                                 std::mt19937_64& eng) {
  for (int attempt = 0; attempt < 32; ++attempt) {
    Eigen::VectorXd v = unit_inside(S, eng);
    v -= T.project(v);
    if (v.norm() > 1e-9) return v / v.norm();
  }
  return std::nullopt;
}

std::optional<Eigen::VectorXd> unit_orthogonal_to(const Subspace& S, int d, std::mt19937_64& eng) {
  if (S.dim() >= d) return std::nullopt;
  for (int attempt = 0; attempt < 32; ++attempt) {
    Eigen::VectorXd v = gaussian_vector(d, eng);
    v -= S.project(v);
    if (v.norm() > 1e-9) return v / v.norm();
  }
  return std::nullopt;
}

}  // namespace

std::vector<StateAction> stratified_state_actions(const HardInstance& inst, int count,
                                                  std::uint64_t seed) {
  inst.validate();
  const int d = inst.d();
  const double gamma = inst.gamma;
  const double margin = 1e-6;
  std::mt19937_64 eng = make_engine(seed, 0x57a7);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const Eigen::VectorXd& w = inst.w();
  const NestedChain& chain = inst.chain;
  const int L = chain.depth();
  const Subspace w_line = Subspace::line(w);

  // One action generator per nonempty region.
  std::vector<std::function<std::optional<Eigen::VectorXd>()>> regions;

  for (int cap_sign : {+1, -1}) {
    regions.push_back([&, cap_sign]() -> std::optional<Eigen::VectorXd> {
      double alpha = gamma + margin + (1.0 - gamma - margin) * unif(eng);
      double beta = unif(eng) * std::sqrt(std::max(0.0, 1.0 - alpha * alpha));
      Eigen::VectorXd x = cap_sign * alpha * w;
      if (auto c = unit_orthogonal_to(w_line, d, eng)) x += beta * *c;
      return x;
    });
  }

  // Ring: direction in the w-line sector, radius short of the caps.
  regions.push_back([&]() -> std::optional<Eigen::VectorXd> {
    double alpha = gamma + margin + (1.0 - gamma - margin) * unif(eng);
    double dir = unif(eng) < 0.5 ? 1.0 : -1.0;
    Eigen::VectorXd xhat = dir * alpha * w;
    if (auto c = unit_orthogonal_to(w_line, d, eng))
      xhat += std::sqrt(std::max(0.0, 1.0 - alpha * alpha)) * *c;
    double rmax = gamma / alpha * (1.0 - margin);
    double r = (margin + (1.0 - margin) * unif(eng)) * rmax;
    return r * xhat;
  });

  // Shell k: inside the sector of B_k but not of B_{k+1}, with B_0 the whole
  // space and B_{L+1} the w line.
  for (int k = 0; k <= L; ++k) {
    int outer_dim = (k >= 1) ? chain.subspaces[k - 1].dim() : d;
    int inner_dim = (k < L) ? chain.subspaces[k].dim() : 1;
    if (outer_dim <= inner_dim) continue;  // empty shell
    regions.push_back([&, k]() -> std::optional<Eigen::VectorXd> {
      double r = 0.05 + 0.95 * unif(eng);
      if (k == 0) {
        const Subspace& b1 = (L >= 1) ? chain.subspaces[0] : w_line;
        auto c = unit_orthogonal_to(b1, d, eng);
        if (!c) return std::nullopt;
        double alpha = (gamma - margin) * unif(eng);
        Eigen::VectorXd xhat =
            alpha * unit_inside(b1, eng) + std::sqrt(std::max(0.0, 1.0 - alpha * alpha)) * *c;
        return r * xhat;
      }
      const Subspace& outer = chain.subspaces[k - 1];
      const Subspace& deeper = (k < L) ? chain.subspaces[k] : w_line;
      auto b = unit_inside_minus(outer, deeper, eng);
      if (!b) return std::nullopt;
      double alpha = gamma + margin + (1.0 - gamma - margin) * unif(eng);
      Eigen::VectorXd xhat = alpha * *b;
      if (auto c = unit_orthogonal_to(outer, d, eng))
        xhat += std::sqrt(std::max(0.0, 1.0 - alpha * alpha)) * *c;
      return r * xhat;
    });
  }

  std::vector<StateAction> out;
  out.reserve(count);
  const int stratified_target = (count * 3) / 4;
  std::size_t region_idx = 0;
  int attempts = 0;
  while (static_cast<int>(out.size()) < count && attempts < 50 * count + 100) {
    ++attempts;
    std::optional<Eigen::VectorXd> a;
    if (static_cast<int>(out.size()) < stratified_target) {
      a = regions[region_idx % regions.size()]();
      ++region_idx;
    } else {
      a = random_ball_point(d, eng);
    }
    if (!a) continue;
    double n = a->norm();
    if (n > 1.0) *a /= n * (1.0 + 1e-12);
    BallVector action(*a);
    State s = State::start(d);
    if (inst.family == Family::PE) {
      switch (eng() % 3) {
        case 1:
          s = State::at(BallVector(random_ball_point(d, eng)));
          break;
        case 2:
          s = State::at(action);
          break;
        default:
          break;
      }
    } else if (eng() % 2 == 1) {
      // BPI admits two query shapes: the start state with a free action, or a
      // ball state with its forced action.
      s = State::at(action);
    }
    out.push_back(StateAction{s, action});
  }
  return out;
}

RealizabilityReport verify_realizability(const HardInstance& inst, int samples,
                                         std::uint64_t seed) {
  Policy policy = canonical_policy(inst);
  QFunction q = [&inst](const State&, const BallVector& a) {
    return inst.sign * a.coords().dot(inst.w());
  };
  RealizabilityReport report;
  std::vector<StateAction> sas = stratified_state_actions(inst, samples, seed);
  report.samples = static_cast<int>(sas.size());
  for (const auto& sa : sas) {
    double residual = std::abs(true_q(inst, sa) - bellman_apply(inst, policy, q, sa));
    report.max_residual = std::max(report.max_residual, residual);
  }
  report.pass = report.samples > 0 && report.max_residual <= 1e-9;
  return report;
}

int default_horizon(double gamma) {
  return static_cast<int>(std::ceil(std::log(1e-9) / std::log(gamma)));
}

double value_of_policy(const HardInstance& inst, const Policy& policy, const State& s0,
                       int horizon) {
  double value = 0.0;
  double discount = 1.0;
  State s = s0;
  for (int t = 0; t < horizon; ++t) {
    BallVector a = policy(s);
    StateAction sa{s, a};
    value += discount * reward(inst, sa);
    discount *= inst.gamma;
    s = State::at(successor(inst, sa));
  }
  return value;
}

HardInstance random_hard_instance(Family family, int d, double gamma, int sign, int depth,
                                  std::uint64_t seed) {
  if (d < 2) throw std::invalid_argument("random_hard_instance: d must be >= 2");
  if (depth < 1) throw std::invalid_argument("random_hard_instance: depth must be >= 1");
  std::mt19937_64 eng = make_engine(seed, 0x1157);
  std::normal_distribution<double> normal(0.0, 1.0);
  HardInstance inst;
  inst.family = family;
  inst.gamma = gamma;
  inst.sign = sign;

  // Dimensions decrease strictly until they bottom out at 1.
  std::vector<int> dims;
  int prev = d;
  for (int k = 0; k < depth; ++k) {
    int hi = std::max(1, prev - 1);
    int m = 1 + static_cast<int>(eng() % static_cast<std::uint64_t>(hi));
    dims.push_back(m);
    prev = m;
  }

  auto draw_span = [&](int rows, int cols) {
    Eigen::MatrixXd g(rows, cols);
    for (;;) {
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) g(i, j) = normal(eng);
      Subspace s = Subspace::span_of(g);
      if (s.dim() == cols) return s;
    }
  };

  Subspace current = draw_span(d, dims[0]);
  inst.chain.subspaces.push_back(current);
  for (int k = 1; k < depth; ++k) {
    Subspace u = draw_span(current.dim(), dims[k]);
    Subspace next = Subspace::from_orthonormal(current.basis() * u.basis());
    inst.chain.subspaces.push_back(next);
    current = next;
  }
  inst.chain.committed_upto = depth;
  inst.chain.w = exact_unit(current.basis() * gaussian_vector(current.dim(), eng));
  inst.validate();
  return inst;
}

}  // namespace batchbound
