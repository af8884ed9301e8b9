#include "batchbound/exact_unit.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

#include "batchbound/errors.hpp"

namespace batchbound {

namespace {

bool newton_with_restarts(Eigen::VectorXd& w, int max_restarts) {
  const int d = static_cast<int>(w.size());
  std::mt19937_64 local(0x9e3779b97f4a7c15ULL);  // fixed stream: deterministic per input
  for (int restarts = 0; restarts < max_restarts; ++restarts) {
    for (int it = 0; it < 6; ++it) {
      double s = w.dot(w);
      if (s == 1.0) return true;
      w *= 1.0 / std::sqrt(s);
    }
    int j = static_cast<int>(local() % d);
    int ulps = 1 + static_cast<int>(local() % (2 + restarts / 10));
    double dir = (local() & 1) ? 2.0 : -2.0;
    for (int u = 0; u < ulps; ++u) w[j] = std::nextafter(w[j], dir);
  }
  return w.dot(w) == 1.0;
}

// Walk ulp neighbors of the second-largest coordinate and recompute the
// largest from the norm constraint. Scanning the smaller of the two keeps the
// perturbation tiny; the recomputed larger coordinate only absorbs rounding.
bool pair_lattice_scan(Eigen::VectorXd& w) {
  const int d = static_cast<int>(w.size());
  if (d < 2) return false;
  int j1 = 0;
  for (int i = 1; i < d; ++i)
    if (std::abs(w[i]) > std::abs(w[j1])) j1 = i;
  int j2 = (j1 == 0) ? 1 : 0;
  for (int i = 0; i < d; ++i)
    if (i != j1 && std::abs(w[i]) > std::abs(w[j2])) j2 = i;

  const double a0 = w[j1], b0 = w[j2];
  const double rest = w.dot(w) - a0 * a0 - b0 * b0;
  for (int half = 0; half <= 1500; ++half) {
    for (int sign_step = 0; sign_step < 2; ++sign_step) {
      if (half == 0 && sign_step == 1) continue;
      int db = sign_step == 0 ? half : -half;
      double b = b0;
      for (int u = 0; u < std::abs(db); ++u) b = std::nextafter(b, db > 0 ? 2.0 : -2.0);
      double target = 1.0 - rest - b * b;
      if (target <= 0.0) continue;
      double a_base = std::copysign(std::sqrt(target), a0);
      for (int da = -4; da <= 4; ++da) {
        double a = a_base;
        for (int u = 0; u < std::abs(da); ++u) a = std::nextafter(a, da > 0 ? 2.0 : -2.0);
        w[j1] = a;
        w[j2] = b;
        if (w.dot(w) == 1.0) return true;
      }
    }
  }
  w[j1] = a0;
  w[j2] = b0;
  return false;
}

}  // namespace

Eigen::VectorXd exact_unit(Eigen::VectorXd v) {
  double n = v.norm();
  if (!(n > 0.0)) throw std::invalid_argument("exact_unit: zero vector");
  v /= n;
  if (v.dot(v) == 1.0) return v;
  if (newton_with_restarts(v, 300)) return v;
  if (pair_lattice_scan(v)) return v;
  throw InvariantBreach("exact_unit: could not reach an exactly unit vector");
}

}  // namespace batchbound
