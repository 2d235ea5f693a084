#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "fixpoint/function_space.hpp"

namespace fixpoint {

/// Seeded generator with platform-independent draws.
///
/// std::mt19937_64 output is fixed by the standard but the <random>
/// distributions are not, so the draws here are built from raw engine
/// output to keep results byte-identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n), rejection sampled.
  std::uint64_t index(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t r = engine_();
    while (r >= limit) r = engine_();
    return r % n;
  }

  /// Standard normal via Box-Muller (one draw per call, no caching).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  bool bernoulli(double p) { return uniform() < p; }

  Vector normal_vector(Index n) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v(i) = normal();
    return v;
  }

  Matrix normal_matrix(Index rows, Index cols) {
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) m(i, j) = normal();
    return m;
  }

  /// Uniform point in the L2 ball of the given radius around the origin.
  Vector in_ball(Index n, double radius) {
    Vector v = normal_vector(n);
    double len = v.norm();
    while (len == 0.0) {
      v = normal_vector(n);
      len = v.norm();
    }
    const double r = radius * std::pow(uniform(), 1.0 / static_cast<double>(n));
    return v * (r / len);
  }

  /// Uniform point on the L2 sphere of the given radius.
  Vector on_sphere(Index n, double radius) {
    Vector v = normal_vector(n);
    double len = v.norm();
    while (len == 0.0) {
      v = normal_vector(n);
      len = v.norm();
    }
    return v * (radius / len);
  }

  /// Derive an independent child seed (splitmix64 step).
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace fixpoint
