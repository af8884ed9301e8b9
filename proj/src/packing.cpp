#include "batchbound/packing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "batchbound/errors.hpp"
#include "batchbound/rng.hpp"

namespace batchbound {

void Packing::validate() const {
  if (d < 1 || m < 1 || m > d) throw std::invalid_argument("Packing: need 1 <= m <= d");
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("Packing: gamma out of (0,1)");
  for (const auto& s : members) {
    if (s.ambient_dim() != d || s.dim() != m)
      throw std::invalid_argument("Packing: member dimensions disagree with (d, m)");
  }
}

double g_of_gamma(double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("g_of_gamma: gamma out of (0,1)");
  return 2.0 * gamma * gamma - 1.0;
}

PackingCheck verify_packing(const Packing& p, double required_dmin) {
  p.validate();
  PackingCheck out;
  out.min_chordal = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < p.members.size(); ++i) {
    for (std::size_t j = i + 1; j < p.members.size(); ++j) {
      double dist = chordal_distance(p.members[i], p.members[j]);
      if (dist < out.min_chordal) {
        out.min_chordal = dist;
        out.violating_pair = {static_cast<int>(i), static_cast<int>(j)};
      }
    }
  }
  out.ok = out.min_chordal >= required_dmin - 1e-9;
  if (out.ok) out.violating_pair = {-1, -1};
  return out;
}

PackingSizeBound product_packing_size(std::int64_t d, std::int64_t m, std::int64_t k) {
  if (d < 2 || (d & (d - 1)) != 0)
    throw std::invalid_argument("product_packing_size: d must be a power of two >= 2");
  if (m < 1 || m >= d) throw std::invalid_argument("product_packing_size: need 1 <= m < d");
  if (k < 1 || k >= d) throw std::invalid_argument("product_packing_size: need 1 <= k < d");
  PackingSizeBound out;
  const std::int64_t exponent = (k + 1) / 2 - 1;  // ceil(k/2) - 1
  out.size = boost::multiprecision::pow(boost::multiprecision::cpp_int(d / 2),
                                        static_cast<unsigned>(exponent));
  out.size *= d / m;
  const double inner = 1.0 - static_cast<double>(m) * (k - 1) * (k - 1) / static_cast<double>(d);
  out.dmin_guarantee = std::sqrt(static_cast<double>(m)) * std::sqrt(std::max(0.0, inner));
  return out;
}

BudgetReport budget_report(std::int64_t d, int K, double gamma, std::optional<double> n_total) {
  if (d < 2) throw std::invalid_argument("budget_report: d must be >= 2");
  if (K < 1) throw std::invalid_argument("budget_report: K must be >= 1");
  if (!(gamma >= std::sqrt(3.0 / 4.0) && gamma < 1.0))
    throw std::invalid_argument("budget_report: gamma must lie in [sqrt(3/4), 1)");
  BudgetReport out;
  out.d = d;
  out.K = K;
  out.gamma = gamma;
  out.g = g_of_gamma(gamma);
  out.d_plus = 1;
  while (out.d_plus * 2 <= d) out.d_plus *= 2;
  const double logd = std::log(static_cast<double>(out.d_plus));
  for (int k = 1; k <= K; ++k) {
    // d_plus^(1/4^k), evaluated in log space to dodge integer pow overflow
    double root = std::exp(logd / std::pow(4.0, k));
    out.per_round_caps.push_back(std::exp(out.g / 8.0 * root));
  }
  out.W = out.per_round_caps.back();
  out.k_threshold = std::numeric_limits<double>::quiet_NaN();
  if (n_total.has_value()) {
    double logn = std::log(*n_total);
    double denom = std::log(8.0 / out.g * logn);
    out.k_threshold = std::log(std::log(static_cast<double>(d) / 2.0) / denom) / std::log(4.0);
  }
  return out;
}

Subspace pigeonhole_select(const Packing& p, const std::vector<Eigen::VectorXd>& queries) {
  p.validate();
  const int n = static_cast<int>(queries.size());
  const int count = static_cast<int>(p.members.size());
  if (count < n + 1)
    throw std::invalid_argument("packing too coarse: need more members than queries");
  const double g = g_of_gamma(p.gamma);
  for (int i = 0; i < count; ++i)
    for (int j = i + 1; j < count; ++j)
      if (principal_angles(p.members[i], p.members[j]).max_cosine() >= g)
        throw std::invalid_argument("packing too coarse: pairwise max cosine reaches g(gamma)");

  std::vector<bool> taken(count, false);
  for (const auto& q : queries) {
    if (q.size() != p.d) throw std::invalid_argument("pigeonhole_select: query dimension mismatch");
    int best = 0;
    double best_cos = -1.0;
    for (int j = 0; j < count; ++j) {
      double c = (p.members[j].basis().transpose() * q).norm();  // max cosine up to 1/||q||
      if (c > best_cos) {
        best_cos = c;
        best = j;
      }
    }
    taken[best] = true;
  }
  int chosen = -1;
  for (int j = 0; j < count; ++j)
    if (!taken[j]) {
      chosen = j;
      break;
    }
  if (chosen < 0) throw InvariantBreach("pigeonhole_select: no member left unassigned");
  for (const auto& q : queries)
    if (sector_contains(p.members[chosen], p.gamma, q))
      throw InvariantBreach("pigeonhole guarantee violated: selected member's sector hit a query");
  return p.members[chosen];
}

namespace {

double evasion_margin(const Subspace& H, const std::vector<Eigen::VectorXd>& queries, double gamma) {
  double worst = 0.0;
  for (const auto& q : queries) worst = std::max(worst, sector_cosine(H, q));
  return gamma - worst;
}

bool evades_all(const Subspace& H, const std::vector<Eigen::VectorXd>& queries, double gamma) {
  for (const auto& q : queries)
    if (sector_contains(H, gamma, q)) return false;
  return true;
}

}  // namespace

std::optional<Subspace> find_evading_subspace(const std::vector<Eigen::VectorXd>& queries, int d,
                                              int m, double gamma,
                                              const EvasionSearchOptions& opts) {
  if (d < 1 || m < 1 || m > d) throw std::invalid_argument("find_evading_subspace: need 1 <= m <= d");
  if (!(gamma > 0.0 && gamma < 1.0))
    throw std::invalid_argument("find_evading_subspace: gamma out of (0,1)");
  for (const auto& q : queries)
    if (q.size() != d) throw std::invalid_argument("find_evading_subspace: query dimension mismatch");

  long used = 0;

  // Exact layer: if the queries span at most d - m dimensions, any m columns
  // of the complement evade with cosine ~0. With no queries this degenerates
  // to the first m standard basis vectors.
  {
    std::vector<Eigen::VectorXd> nonzero;
    for (const auto& q : queries)
      if (q.norm() > 0.0) nonzero.push_back(q);
    int rank = nonzero.empty() ? 0 : Subspace::span_of(nonzero, d).dim();
    ++used;
    if (rank <= d - m) {
      Subspace comp = orthonormal_complement_basis(nonzero, d);
      Subspace cand = Subspace::from_orthonormal(comp.basis().leftCols(m));
      if (evades_all(cand, queries, gamma)) return cand;
    }
  }

  // Random layer: seeded Haar subspaces, keeping the best margin seen.
  std::mt19937_64 eng = make_engine(opts.seed, 0x5eed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::optional<Subspace> best;
  double best_margin = -std::numeric_limits<double>::infinity();
  const long random_budget = used + static_cast<long>(0.6 * opts.budget);
  while (used < random_budget && used < opts.budget) {
    ++used;
    Eigen::MatrixXd g(d, m);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < m; ++j) g(i, j) = normal(eng);
    Subspace cand = Subspace::span_of(g);
    if (cand.dim() != m) continue;
    double margin = evasion_margin(cand, queries, gamma);
    if (margin > best_margin) {
      best_margin = margin;
      best = cand;
    }
    if (margin > 0.0 && evades_all(cand, queries, gamma)) return cand;
  }

  // Ascent layer: perturb the best candidate, keep improvements, shrink the
  // step on failure.
  if (best) {
    double step = 0.3;
    Subspace current = *best;
    while (used < opts.budget) {
      ++used;
      Eigen::MatrixXd g(d, m);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < m; ++j) g(i, j) = normal(eng);
      Subspace cand = Subspace::span_of(current.basis() + step * g);
      if (cand.dim() != m) continue;
      double margin = evasion_margin(cand, queries, gamma);
      if (margin > best_margin) {
        best_margin = margin;
        current = cand;
        step = std::min(0.5, step * 1.3);
        if (margin > 0.0 && evades_all(cand, queries, gamma)) return cand;
      } else {
        step = std::max(1e-4, step * 0.8);
      }
    }
  }

  // Pigeonhole layer over a user-supplied packing.
  if (opts.packing != nullptr) {
    const Packing& p = *opts.packing;
    if (p.d == d && p.m == m && p.gamma <= gamma &&
        static_cast<int>(p.members.size()) > static_cast<int>(queries.size())) {
      try {
        Subspace cand = pigeonhole_select(p, queries);
        if (evades_all(cand, queries, gamma)) return cand;
      } catch (const std::invalid_argument&) {
        // packing unusable for this query set; fall through
      }
    }
  }
  return std::nullopt;
}

}  // namespace batchbound
