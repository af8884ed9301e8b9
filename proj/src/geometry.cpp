#include "batchbound/geometry.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "batchbound/errors.hpp"

namespace batchbound {

BallVector::BallVector(Eigen::VectorXd coords) : coords_(std::move(coords)) {
  if (coords_.size() < 1) throw std::invalid_argument("BallVector: dimension must be >= 1");
  if (coords_.norm() > 1.0 + kGeomTol)
    throw std::invalid_argument("BallVector: norm exceeds 1");
}

BallVector BallVector::zero(int d) { return BallVector(Eigen::VectorXd::Zero(d)); }

BallVector BallVector::unit(const Eigen::VectorXd& v) {
  double n = v.norm();
  if (n < kDropTol) throw std::invalid_argument("BallVector::unit: zero vector");
  return BallVector(v / n);
}

namespace {

// Modified Gram-Schmidt with a second sweep; returns kept columns.
Eigen::MatrixXd mgs_orthonormalize(const Eigen::MatrixXd& columns) {
  const int d = static_cast<int>(columns.rows());
  Eigen::MatrixXd kept(d, columns.cols());
  int r = 0;
  for (int c = 0; c < columns.cols(); ++c) {
    Eigen::VectorXd v = columns.col(c);
    const double original = v.norm();
    for (int pass = 0; pass < 2; ++pass)
      for (int j = 0; j < r; ++j) v -= kept.col(j).dot(v) * kept.col(j);
    if (v.norm() < kDropTol * std::max(1.0, original)) continue;  // dependent
    kept.col(r++) = v / v.norm();
  }
  return kept.leftCols(r);
}

}  // namespace

Subspace Subspace::from_orthonormal(Eigen::MatrixXd basis) {
  const int d = static_cast<int>(basis.rows());
  const int m = static_cast<int>(basis.cols());
  if (m < 1 || m > d) throw std::invalid_argument("Subspace: need 1 <= dim <= ambient_dim");
  Eigen::MatrixXd gram = basis.transpose() * basis;
  if ((gram - Eigen::MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff() > kGeomTol)
    throw std::invalid_argument("Subspace: basis is not orthonormal");
  return Subspace(std::move(basis));
}

Subspace Subspace::span_of(const Eigen::MatrixXd& columns) {
  Eigen::MatrixXd basis = mgs_orthonormalize(columns);
  if (basis.cols() == 0) throw std::invalid_argument("Subspace::span_of: empty span");
  return Subspace(std::move(basis));
}

Subspace Subspace::span_of(const std::vector<Eigen::VectorXd>& vectors, int ambient_dim) {
  Eigen::MatrixXd columns(ambient_dim, static_cast<Eigen::Index>(vectors.size()));
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].size() != ambient_dim)
      throw std::invalid_argument("Subspace::span_of: inconsistent dimensions");
    columns.col(static_cast<Eigen::Index>(i)) = vectors[i];
  }
  return span_of(columns);
}

Subspace Subspace::full(int d) {
  if (d < 1) throw std::invalid_argument("Subspace::full: d must be >= 1");
  return Subspace(Eigen::MatrixXd::Identity(d, d));
}

Subspace Subspace::line(const Eigen::VectorXd& v) {
  double n = v.norm();
  if (n < kDropTol) throw std::invalid_argument("Subspace::line: zero vector");
  Eigen::MatrixXd basis(v.size(), 1);
  basis.col(0) = v / n;
  return Subspace(std::move(basis));
}

Eigen::VectorXd Subspace::project(const Eigen::VectorXd& x) const {
  if (x.size() != basis_.rows()) throw std::invalid_argument("project: dimension mismatch");
  return basis_ * (basis_.transpose() * x);
}

bool Subspace::contains(const Eigen::VectorXd& x, double tol) const {
  return (project(x) - x).norm() <= tol;
}

bool Subspace::contains_subspace(const Subspace& inner, double tol) const {
  if (inner.ambient_dim() != ambient_dim()) return false;
  for (int c = 0; c < inner.dim(); ++c)
    if (!contains(inner.basis().col(c), tol)) return false;
  return true;
}

bool cap_contains(const Eigen::VectorXd& w, double gamma, const Eigen::VectorXd& x) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("cap_contains: gamma out of (0,1)");
  const double wn = w.norm();
  if (wn <= 0.0) throw std::invalid_argument("cap_contains: zero direction");
  if (x.size() != w.size()) throw std::invalid_argument("cap_contains: dimension mismatch");
  return x.dot(w) / wn > gamma + kStrictTol;
}

double sector_cosine(const Subspace& H, const Eigen::VectorXd& x) {
  if (x.size() != H.ambient_dim()) throw std::invalid_argument("sector_cosine: dimension mismatch");
  const double xn = x.norm();
  if (xn == 0.0) return 0.0;
  return (H.basis().transpose() * x).norm() / xn;
}

bool sector_contains(const Subspace& H, double gamma, const Eigen::VectorXd& x) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("sector_contains: gamma out of (0,1)");
  return sector_cosine(H, x) > gamma + kStrictTol;
}

PrincipalAngles principal_angles(const Subspace& A, const Subspace& B) {
  if (A.ambient_dim() != B.ambient_dim() || A.dim() != B.dim())
    throw std::invalid_argument("principal_angles: dimension mismatch");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A.basis().transpose() * B.basis());
  PrincipalAngles out;
  for (int i = 0; i < svd.singularValues().size(); ++i) {
    double s = std::clamp(svd.singularValues()[i], 0.0, 1.0);
    out.cosines.push_back(s);
    out.angles.push_back(std::acos(s));
  }
  // Eigen returns singular values descending, so angles come out ascending.
  return out;
}

double chordal_distance(const Subspace& A, const Subspace& B) {
  PrincipalAngles pa = principal_angles(A, B);
  double sum = 0.0;
  // sin^2 = (1 - cos)(1 + cos), stabler than sin(acos(.)) near cos = 1.
  for (double c : pa.cosines) sum += (1.0 - c) * (1.0 + c);
  return std::sqrt(std::max(0.0, sum));
}

Subspace orthonormal_complement_basis(const std::vector<Eigen::VectorXd>& vectors, int ambient_dim) {
  if (ambient_dim < 1) throw std::invalid_argument("complement: ambient_dim must be >= 1");
  Eigen::MatrixXd spanning(ambient_dim, static_cast<Eigen::Index>(vectors.size()));
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].size() != ambient_dim)
      throw std::invalid_argument("complement: inconsistent dimensions");
    spanning.col(static_cast<Eigen::Index>(i)) = vectors[i];
  }
  Eigen::MatrixXd base = mgs_orthonormalize(spanning);
  const int rank = static_cast<int>(base.cols());
  if (rank == ambient_dim) throw std::invalid_argument("complement: span is the whole space, no complement");

  Eigen::MatrixXd acc(ambient_dim, ambient_dim);
  acc.leftCols(rank) = base;
  int r = rank;
  for (int i = 0; i < ambient_dim && r < ambient_dim; ++i) {
    Eigen::VectorXd v = Eigen::VectorXd::Unit(ambient_dim, i);
    for (int pass = 0; pass < 2; ++pass)
      for (int j = 0; j < r; ++j) v -= acc.col(j).dot(v) * acc.col(j);
    if (v.norm() < kDropTol) continue;
    acc.col(r++) = v / v.norm();
  }
  if (r != ambient_dim) throw InvariantBreach("complement: standard basis completion failed");
  return Subspace::from_orthonormal(acc.rightCols(ambient_dim - rank));
}

std::optional<Subspace> restrict_and_lift(
    const Subspace& B, const std::vector<Eigen::VectorXd>& points,
    const std::function<std::optional<Subspace>(const std::vector<Eigen::VectorXd>&)>& inner_find) {
  std::vector<Eigen::VectorXd> restricted;
  restricted.reserve(points.size());
  for (const auto& x : points) {
    if (x.size() != B.ambient_dim())
      throw std::invalid_argument("restrict_and_lift: dimension mismatch");
    restricted.push_back(B.basis().transpose() * x);
  }
  std::optional<Subspace> inner = inner_find(restricted);
  if (!inner) return std::nullopt;
  if (inner->ambient_dim() != B.dim())
    throw std::invalid_argument("restrict_and_lift: inner subspace has wrong ambient dimension");
  return Subspace::from_orthonormal(B.basis() * inner->basis());
}

}  // namespace batchbound
