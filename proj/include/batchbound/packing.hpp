#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "batchbound/geometry.hpp"

namespace batchbound {

// Collection of equal-dimension subspaces of R^d used to argue that some
// member's sector must dodge any small enough query set.
struct Packing {
  int d = 0;
  int m = 0;
  double gamma = 0.0;
  std::vector<Subspace> members;

  void validate() const;  // throws on shape mismatch
};

// 2 gamma^2 - 1; exceeds 1/2 exactly when gamma > sqrt(3/4). A pairwise
// max-cosine below this threshold is what the pigeonhole argument needs.
double g_of_gamma(double gamma);

struct PackingCheck {
  bool ok = false;
  double min_chordal = 0.0;
  std::pair<int, int> violating_pair{-1, -1};
};

// Min pairwise chordal distance >= required_dmin - 1e-9.
PackingCheck verify_packing(const Packing& p, double required_dmin);

struct PackingSizeBound {
  boost::multiprecision::cpp_int size;  // grows superpolynomially, keep exact
  double dmin_guarantee = 0.0;
};

// Size (d/2)^(ceil(k/2)-1) * floor(d/m) of the recursive product packing in
// dimension d = 2^N, with pairwise chordal distance at least
// sqrt(m) * sqrt(1 - m (k-1)^2 / d). Returns the bound only; the adversary
// never needs explicit members at this size.
PackingSizeBound product_packing_size(std::int64_t d, std::int64_t m, std::int64_t k);

struct BudgetReport {
  std::int64_t d = 0;
  std::int64_t d_plus = 0;  // largest power of two <= d
  int K = 0;
  double gamma = 0.0;
  double g = 0.0;
  std::vector<double> per_round_caps;  // exp((g/8) d_plus^(1/4^k)), k = 1..K
  double W = 0.0;                      // = per_round_caps.back()
  double k_threshold = 0.0;            // NaN unless a total-query bound was given
};

// Query-budget frontier for d, K rounds, gamma in [sqrt(3/4), 1). If n_total
// is given, also evaluates the round-count threshold
// (1/log 4) * log(log(d/2) / log((8/g) log n)).
BudgetReport budget_report(std::int64_t d, int K, double gamma,
                           std::optional<double> n_total = std::nullopt);

// Pigeonhole selection: with more members than queries and pairwise first
// principal cosine below g(gamma), some member's sector contains no query.
// Each query is assigned to the member of largest max-cosine (lowest index on
// ties); the lowest-index unassigned member is returned after a hard sector
// re-check. Throws "packing too coarse" on precondition violations and
// InvariantBreach("pigeonhole guarantee violated") if the re-check fails.
Subspace pigeonhole_select(const Packing& p, const std::vector<Eigen::VectorXd>& queries);

struct EvasionSearchOptions {
  long budget = 100000;       // candidate subspaces examined across all layers
  std::uint64_t seed = 0;
  const Packing* packing = nullptr;  // optional pigeonhole fallback
};

// Find an m-dim subspace of R^d whose gamma-sector contains none of the
// queries. Layered: exact complement when the queries span few dimensions,
// then seeded random subspaces, then local ascent on the evasion margin, then
// pigeonhole over a supplied packing. Every candidate is verified with
// sector_contains before being returned. Deterministic given (seed, budget).
std::optional<Subspace> find_evading_subspace(const std::vector<Eigen::VectorXd>& queries, int d,
                                              int m, double gamma,
                                              const EvasionSearchOptions& opts = {});

}  // namespace batchbound
