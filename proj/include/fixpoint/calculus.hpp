#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fixpoint/function_space.hpp"
#include "fixpoint/operators.hpp"

namespace fixpoint {

/// Power iteration on A^T A ran out of iterations; carries the last estimate.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double estimate)
      : std::runtime_error(what), estimate_(estimate) {}
  double estimate() const { return estimate_; }

 private:
  double estimate_;
};

struct SingularPair {
  double value = 0.0;
  Vector right;  // unit right singular vector
  int iterations = 0;
};

/// Largest singular value and its right singular vector by power iteration
/// on A^T A from a fixed-seed start vector. Stops once the eigen-residual
/// ||A^T A v - mu v|| falls below tol * mu.
SingularPair top_singular(const Matrix& A, double tol = 1e-10, int max_iter = 200000);

double spectral_norm(const Matrix& A, double tol = 1e-10, int max_iter = 200000);

enum class LipschitzMethod { SpectralPowerIteration, PairSampling, DerivativeBound };

std::string to_string(LipschitzMethod method);

struct LipschitzEstimate {
  double value = 0.0;
  LipschitzMethod method = LipschitzMethod::PairSampling;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  bool is_upper_bound = false;
};

/// Exact Lipschitz constant of x -> A x + b in the L2 norm.
LipschitzEstimate spectral_lipschitz(const Matrix& A);

Matrix attention_frechet(const AttentionOperator& op, const Matrix& Y, const Matrix& H);

/// Central difference (T(y + t h) - T(y - t h)) / (2 t).
Vector fd_directional(const Operator& T, const Vector& y, const Vector& h, double t = 1e-5);

/// Central-difference Jacobian, one column per coordinate.
Matrix fd_jacobian(const Operator& T, const Vector& x, double t = 1e-5);

struct FrechetDirectionalResult {
  Vector analytic;
  Vector finite_difference;
  double rel_error = 0.0;
  double step = 0.0;
};

inline constexpr double kRelErrorFloor = 1e-14;

FrechetDirectionalResult frechet_directional_check(const AttentionOperator& op, const Matrix& Y,
                                                   const Matrix& H, double t = 1e-5);

struct FrechetSuiteReport {
  std::size_t trials = 0;
  double step = 0.0;
  double max_rel_error = 0.0;
  double order_step = 0.0;
  double min_halving_ratio = 0.0;  // min over trials of err(h) / err(h / 2)
  double order_slope = 0.0;        // log2 of the median halving ratio
};

/// Compares attention_frechet against central differences on random (Y, H)
/// with Frobenius norms drawn from [0.1, 1]. Each trial draws its own
/// operator (width <= max_width, tokens <= max_tokens, weights N(0, 1/d))
/// unless `fixed` is given. The truncation order is probed at the larger
/// `order_step`, where rounding does not mask the t^2 term.
FrechetSuiteReport frechet_consistency_suite(const AttentionOperator* fixed, std::size_t trials,
                                             double step, double order_step, std::uint64_t seed,
                                             Index max_width = 8, Index max_tokens = 8);

/// Pairs (x, y) for Lipschitz sampling. Both points are drawn from the ball
/// around `center`. Every `direction_stride`-th pair is instead placed along
/// one of `directions` (cycled), so known worst-case directions get probed.
struct PairSampler {
  Vector center;
  double radius = 1.0;
  std::vector<Vector> directions;
  std::size_t direction_stride = 10;
};

/// max ||T(x) - T(y)|| / ||x - y|| over sampled pairs in T's natural norm.
/// A lower bound on the true constant.
LipschitzEstimate lipschitz_sample(const Operator& T, const PairSampler& sampler,
                                   std::size_t n_pairs, std::uint64_t seed);

struct Ball {
  Vector center;
  double radius = 1.0;
};

inline constexpr Index kMaxFdJacobianDim = 64;

/// max over sampled u in the ball of ||T'(u)||_2 (the spectral norm of the
/// Jacobian). Uses the operator's analytic Jacobian, falling back to a
/// central-difference Jacobian up to kMaxFdJacobianDim coordinates. Half of
/// the samples lie on the boundary sphere.
LipschitzEstimate derivative_bound_lipschitz(const Operator& T, const Ball& region,
                                             std::size_t n_samples, std::uint64_t seed);

struct GnnLipschitzReport {
  double L = 0.0;                    // spectral norm of W
  std::vector<Index> coefficients;   // alpha_i: #{v : i in N(v)}
  Index alpha_max = 0;
  double product = 0.0;              // L * alpha_max
  bool certified = false;            // product < 1
};

/// alpha_i for every node: how many neighbourhoods N(v) contain node i.
std::vector<Index> neighborhood_membership(const Graph& graph);

GnnLipschitzReport gnn_lipschitz_report(const GnnAggregateOperator& op);

/// W * target / (||W||_2 * alpha_max).
Matrix rescale_to_contraction(const Matrix& W, Index alpha_max, double target);

}  // namespace fixpoint
