#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <vector>

namespace batchbound {

// Membership tests treat numerical ties as "outside": cosine must exceed the
// threshold by more than kStrictTol to count as inside a cap or sector.
inline constexpr double kStrictTol = 1e-12;
// Slack allowed on ball membership, unit norms, orthonormality, containment.
inline constexpr double kGeomTol = 1e-9;
// Gram-Schmidt residual below which a candidate is treated as dependent.
inline constexpr double kDropTol = 1e-10;

// A point of the closed unit ball in R^d. Doubles as state, action and
// feature value: the hard families use the identity feature map.
class BallVector {
 public:
  explicit BallVector(Eigen::VectorXd coords);
  static BallVector zero(int d);
  // Normalizes v to unit length; v must be nonzero.
  static BallVector unit(const Eigen::VectorXd& v);

  const Eigen::VectorXd& coords() const { return coords_; }
  int dim() const { return static_cast<int>(coords_.size()); }
  double norm() const { return coords_.norm(); }

 private:
  Eigen::VectorXd coords_;
};

// Linear subspace of R^d held as a d x m matrix with orthonormal columns.
class Subspace {
 public:
  // Validates orthonormality (basis^T basis = I within kGeomTol).
  static Subspace from_orthonormal(Eigen::MatrixXd basis);
  // Orthonormalizes an arbitrary spanning set with modified Gram-Schmidt and
  // one re-orthogonalization pass, dropping near-dependent columns.
  static Subspace span_of(const std::vector<Eigen::VectorXd>& vectors, int ambient_dim);
  static Subspace span_of(const Eigen::MatrixXd& columns);
  static Subspace full(int d);                        // identity basis
  static Subspace line(const Eigen::VectorXd& v);     // 1-dim, v nonzero

  const Eigen::MatrixXd& basis() const { return basis_; }
  int ambient_dim() const { return static_cast<int>(basis_.rows()); }
  int dim() const { return static_cast<int>(basis_.cols()); }

  // Orthogonal projection basis * (basis^T x).
  Eigen::VectorXd project(const Eigen::VectorXd& x) const;
  // ||proj(x) - x|| <= tol
  bool contains(const Eigen::VectorXd& x, double tol = kGeomTol) const;
  bool contains_subspace(const Subspace& inner, double tol = kGeomTol) const;

 private:
  explicit Subspace(Eigen::MatrixXd basis) : basis_(std::move(basis)) {}
  Eigen::MatrixXd basis_;
};

// x^T w / ||w|| > gamma, strictly. Ties within kStrictTol are outside.
// Note the asymmetry: x is not normalized, so short vectors near w's axis
// fall outside the cap even though their direction points at w.
bool cap_contains(const Eigen::VectorXd& w, double gamma, const Eigen::VectorXd& x);

// max over unit v in H of x^T v / ||x|| > gamma, computed as
// ||proj(x, H)|| / ||x|| > gamma. The zero vector belongs to no sector.
bool sector_contains(const Subspace& H, double gamma, const Eigen::VectorXd& x);

// Cosine of the sector test, i.e. ||proj(x, H)|| / ||x||; 0 for x = 0.
double sector_cosine(const Subspace& H, const Eigen::VectorXd& x);

struct PrincipalAngles {
  std::vector<double> angles;   // ascending, in [0, pi/2]
  std::vector<double> cosines;  // descending, singular values of A^T B

  double min_angle() const { return angles.front(); }
  double max_cosine() const { return cosines.front(); }
};

// Principal angles between equal-dimension subspaces via the SVD of A^T B,
// singular values clamped to [0, 1] before arccos.
PrincipalAngles principal_angles(const Subspace& A, const Subspace& B);

// sqrt(sum_i sin^2 theta_i); 0 iff A = B, at most sqrt(m).
double chordal_distance(const Subspace& A, const Subspace& B);

// Orthonormal basis of the orthogonal complement of span(vectors) in R^d.
// Deterministic: completes with standard basis vectors in index order, so
// e.g. complement of {e1} is [e2, ..., ed]. Throws if the span is all of R^d.
Subspace orthonormal_complement_basis(const std::vector<Eigen::VectorXd>& vectors, int ambient_dim);

// Restrict points to an m-dim subspace B (coordinates B^T x), run inner_find
// in R^m, and lift the found subspace back to R^d as B * U. The lift of a
// sector-evading subspace still evades the original points because
// x^T h = proj_B(x)^T h for h in B and ||proj_B(x)|| <= ||x||.
std::optional<Subspace> restrict_and_lift(
    const Subspace& B, const std::vector<Eigen::VectorXd>& points,
    const std::function<std::optional<Subspace>(const std::vector<Eigen::VectorXd>&)>& inner_find);

}  // namespace batchbound
