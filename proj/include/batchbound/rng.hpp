#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>

namespace batchbound {

// splitmix64 step; used to derive decorrelated child seeds from (seed, index)
// so that per-round / per-cell streams are independent and reproducible.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t index = 0) {
  return std::mt19937_64(mix_seed(seed, index));
}

// Standard Gaussian vector.
inline Eigen::VectorXd gaussian_vector(int d, std::mt19937_64& eng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(d);
  for (int i = 0; i < d; ++i) v[i] = normal(eng);
  return v;
}

// Haar-uniform direction on the unit sphere.
inline Eigen::VectorXd random_unit_vector(int d, std::mt19937_64& eng) {
  Eigen::VectorXd v;
  do {
    v = gaussian_vector(d, eng);
  } while (v.norm() < 1e-12);
  return v / v.norm();
}

// Uniform point of the unit ball (direction Haar, radius r = u^{1/d}).
inline Eigen::VectorXd random_ball_point(int d, std::mt19937_64& eng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double r = std::pow(unif(eng), 1.0 / d);
  return r * random_unit_vector(d, eng);
}

}  // namespace batchbound
