#pragma once

// Independent re-derivations used to cross-check the library. These
// deliberately avoid the code paths under test: grid search instead of the
// projection identity, Gaussian elimination instead of Gram-Schmidt,
// rejection sampling instead of guided search, hand-stepped dynamics.

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <vector>

namespace oracle {

// Max cosine between x and any unit vector of span(b1) by checking both signs.
inline double line_max_cosine(const Eigen::VectorXd& b1, const Eigen::VectorXd& x) {
  if (x.norm() == 0.0) return 0.0;
  return std::abs(x.dot(b1)) / (b1.norm() * x.norm());
}

// Max cosine between x and unit vectors of span{b1, b2} by sweeping a grid of
// directions cos(t) b1 + sin(t) b2, b1 and b2 orthonormal.
inline double plane_max_cosine_grid(const Eigen::VectorXd& b1, const Eigen::VectorXd& b2,
                                    const Eigen::VectorXd& x, int grid_points) {
  const double xn = x.norm();
  if (xn == 0.0) return 0.0;
  const double c1 = x.dot(b1), c2 = x.dot(b2);
  double best = -1.0;
  for (int i = 0; i < grid_points; ++i) {
    double t = 2.0 * M_PI * i / grid_points;
    best = std::max(best, (c1 * std::cos(t) + c2 * std::sin(t)) / xn);
  }
  return best;
}

// Chordal distance between two lines from the single principal angle.
inline double line_chordal(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double c = std::abs(a.normalized().dot(b.normalized()));
  return std::sin(std::acos(std::min(1.0, c)));
}

// Nullspace of the matrix with the given rows, by Gaussian elimination with
// partial pivoting. Returns a (non-orthonormal) spanning set of the kernel.
inline std::vector<Eigen::VectorXd> nullspace_rows(std::vector<Eigen::VectorXd> rows, int d) {
  const double tol = 1e-10;
  int nr = static_cast<int>(rows.size());
  std::vector<int> pivot_col;
  int lead = 0;
  for (int r = 0; r < nr && lead < d; ++r) {
    int piv = -1;
    while (lead < d) {
      piv = r;
      for (int i = r; i < nr; ++i)
        if (std::abs(rows[i][lead]) > std::abs(rows[piv][lead])) piv = i;
      if (std::abs(rows[piv][lead]) > tol) break;
      ++lead;
    }
    if (lead >= d) break;
    std::swap(rows[r], rows[piv]);
    rows[r] /= rows[r][lead];
    for (int i = 0; i < nr; ++i)
      if (i != r) rows[i] -= rows[i][lead] * rows[r];
    pivot_col.push_back(lead);
    ++lead;
  }
  std::vector<bool> is_pivot(d, false);
  for (int c : pivot_col) is_pivot[c] = true;
  std::vector<Eigen::VectorXd> kernel;
  for (int c = 0; c < d; ++c) {
    if (is_pivot[c]) continue;
    Eigen::VectorXd v = Eigen::VectorXd::Zero(d);
    v[c] = 1.0;
    for (std::size_t r = 0; r < pivot_col.size(); ++r) v[pivot_col[r]] = -rows[r][c];
    kernel.push_back(v);
  }
  return kernel;
}

inline Eigen::VectorXd rand_unit(int d, std::mt19937_64& eng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::VectorXd v(d);
  do {
    for (int i = 0; i < d; ++i) v[i] = n(eng);
  } while (v.norm() < 1e-9);
  return v / v.norm();
}

// Orthonormalize columns by Householder QR (independent of the library MGS).
inline Eigen::MatrixXd qr_basis(const Eigen::MatrixXd& columns) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(columns);
  Eigen::MatrixXd q = qr.householderQ();
  return q.leftCols(columns.cols());
}

// Existence check for an m-dim subspace of R^d whose gamma-sector avoids all
// queries, by rejection sampling random subspaces. Returns the number of
// trials until success, or -1.
inline int evading_subspace_exists(const std::vector<Eigen::VectorXd>& queries, int d, int m,
                                   double gamma, int trials, std::mt19937_64& eng) {
  std::normal_distribution<double> n(0.0, 1.0);
  for (int t = 0; t < trials; ++t) {
    Eigen::MatrixXd g(d, m);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < m; ++j) g(i, j) = n(eng);
    Eigen::MatrixXd basis = qr_basis(g);
    bool ok = true;
    for (const auto& q : queries) {
      double qn = q.norm();
      if (qn == 0.0) continue;
      if ((basis.transpose() * q).norm() / qn > gamma) {
        ok = false;
        break;
      }
    }
    if (ok) return t + 1;
  }
  return -1;
}

}  // namespace oracle
