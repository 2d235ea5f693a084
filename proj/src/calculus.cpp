#include "fixpoint/calculus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "fixpoint/random.hpp"

namespace fixpoint {

namespace {
constexpr std::uint64_t kPowerIterationSeed = 0x5eed5eedULL;
}

SingularPair top_singular(const Matrix& A, double tol, int max_iter) {
  if (!A.allFinite()) throw std::invalid_argument("spectral norm: non-finite matrix");
  if (!(tol > 0.0)) throw std::invalid_argument("spectral norm: tol must be positive");
  SingularPair out;
  const Index n = A.cols();
  if (n == 0 || A.rows() == 0 || A.isZero(0.0)) {
    out.right = n > 0 ? Vector::Unit(n, 0) : Vector();
    return out;
  }

  Rng rng(kPowerIterationSeed);
  Vector v = rng.on_sphere(n, 1.0);
  double mu = 0.0;
  for (int it = 1; it <= max_iter; ++it) {
    const Vector Av = A * v;
    const Vector u = A.transpose() * Av;
    mu = Av.squaredNorm();
    const double residual = (u - mu * v).norm();
    const double len = u.norm();
    if (len == 0.0) {
      // v fell into the null space; restart from a fresh direction.
      v = rng.on_sphere(n, 1.0);
      continue;
    }
    if (residual <= tol * mu) {
      out.value = Av.norm();
      out.right = v;
      out.iterations = it;
      return out;
    }
    v = u / len;
  }
  throw ConvergenceError("spectral norm: power iteration did not converge in " +
                             std::to_string(max_iter) + " iterations",
                         std::sqrt(mu));
}

double spectral_norm(const Matrix& A, double tol, int max_iter) {
  return top_singular(A, tol, max_iter).value;
}

std::string to_string(LipschitzMethod method) {
  switch (method) {
    case LipschitzMethod::SpectralPowerIteration: return "spectral-power-iteration";
    case LipschitzMethod::PairSampling: return "pair-sampling";
    case LipschitzMethod::DerivativeBound: return "derivative-bound";
  }
  return "pair-sampling";
}

LipschitzEstimate spectral_lipschitz(const Matrix& A) {
  const SingularPair top = top_singular(A);
  LipschitzEstimate est;
  est.value = top.value;
  est.method = LipschitzMethod::SpectralPowerIteration;
  est.samples = static_cast<std::size_t>(top.iterations);
  est.seed = kPowerIterationSeed;
  est.is_upper_bound = true;
  return est;
}

Matrix attention_frechet(const AttentionOperator& op, const Matrix& Y, const Matrix& H) {
  return op.frechet(Y, H);
}

Vector fd_directional(const Operator& T, const Vector& y, const Vector& h, double t) {
  if (t == 0.0 || !std::isfinite(t)) throw std::invalid_argument("finite difference: step must be nonzero");
  if (y.size() != h.size()) throw std::invalid_argument("finite difference: direction shape mismatch");
  return (T.apply(y + t * h) - T.apply(y - t * h)) / (2.0 * t);
}

Matrix fd_jacobian(const Operator& T, const Vector& x, double t) {
  const Index n = T.dim();
  Matrix J(n, n);
  Vector e = Vector::Zero(n);
  for (Index c = 0; c < n; ++c) {
    e(c) = 1.0;
    J.col(c) = fd_directional(T, x, e, t);
    e(c) = 0.0;
  }
  return J;
}

FrechetDirectionalResult frechet_directional_check(const AttentionOperator& op, const Matrix& Y,
                                                   const Matrix& H, double t) {
  FrechetDirectionalResult r;
  r.step = t;
  r.analytic = AttentionOperator::flatten(attention_frechet(op, Y, H));
  r.finite_difference =
      fd_directional(op, AttentionOperator::flatten(Y), AttentionOperator::flatten(H), t);
  r.rel_error = (r.analytic - r.finite_difference).norm() /
                std::max(r.analytic.norm(), kRelErrorFloor);
  return r;
}

FrechetSuiteReport frechet_consistency_suite(const AttentionOperator* fixed, std::size_t trials,
                                             double step, double order_step, std::uint64_t seed,
                                             Index max_width, Index max_tokens) {
  if (trials < 1) throw std::invalid_argument("frechet suite: need at least one trial");
  if (max_width < 1 || max_tokens < 1) throw std::invalid_argument("frechet suite: bad size limits");
  Rng rng(seed);
  FrechetSuiteReport report;
  report.trials = trials;
  report.step = step;
  report.order_step = order_step;
  report.min_halving_ratio = std::numeric_limits<double>::infinity();
  std::vector<double> ratios;
  ratios.reserve(trials);

  auto draw = [&](Index rows, Index cols) {
    Matrix M(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) M(i, j) = rng.uniform(-1.0, 1.0);
    return Matrix(M * (rng.uniform(0.1, 1.0) / M.norm()));
  };

  for (std::size_t k = 0; k < trials; ++k) {
    std::optional<AttentionOperator> own;
    if (!fixed) {
      const auto d = static_cast<Index>(1 + rng.index(static_cast<std::uint64_t>(max_width)));
      const auto m = static_cast<Index>(1 + rng.index(static_cast<std::uint64_t>(max_tokens)));
      const double s = 1.0 / std::sqrt(static_cast<double>(d));
      own.emplace(rng.normal_matrix(d, d) * s, rng.normal_matrix(d, d) * s, rng.normal_matrix(d, d) * s, m);
    }
    const AttentionOperator& op = fixed ? *fixed : *own;
    const Matrix Y = draw(op.tokens(), op.width());
    const Matrix H = draw(op.tokens(), op.width());
    report.max_rel_error = std::max(report.max_rel_error, frechet_directional_check(op, Y, H, step).rel_error);
    const double coarse = frechet_directional_check(op, Y, H, order_step).rel_error;
    const double fine = frechet_directional_check(op, Y, H, order_step / 2.0).rel_error;
    const double ratio = fine > 0.0 ? coarse / fine : std::numeric_limits<double>::infinity();
    report.min_halving_ratio = std::min(report.min_halving_ratio, ratio);
    ratios.push_back(ratio);
  }
  std::sort(ratios.begin(), ratios.end());
  report.order_slope = std::log2(ratios[ratios.size() / 2]);
  return report;
}

LipschitzEstimate lipschitz_sample(const Operator& T, const PairSampler& sampler,
                                   std::size_t n_pairs, std::uint64_t seed) {
  if (n_pairs < 1) throw std::invalid_argument("lipschitz sample: need at least one pair");
  const Index n = T.dim();
  const Vector center = sampler.center.size() == 0 ? Vector::Zero(n) : sampler.center;
  if (center.size() != n) throw std::invalid_argument("lipschitz sample: center has the wrong length");
  for (const auto& dir : sampler.directions)
    if (dir.size() != n || dir.norm() == 0.0)
      throw std::invalid_argument("lipschitz sample: bad probe direction");

  const Norm measure = T.natural_norm();
  Rng rng(seed);
  std::size_t used = 0;
  std::size_t probe = 0;
  double best = 0.0;
  for (std::size_t k = 0; k < n_pairs; ++k) {
    const Vector x = center + rng.in_ball(n, sampler.radius);
    Vector y;
    const bool directed = !sampler.directions.empty() && sampler.direction_stride > 0 &&
                          k % sampler.direction_stride == 0;
    if (directed) {
      const Vector& dir = sampler.directions[probe++ % sampler.directions.size()];
      y = x + (sampler.radius * rng.uniform(-1.0, 1.0) / dir.norm()) * dir;
    } else {
      y = center + rng.in_ball(n, sampler.radius);
    }
    const double gap = measure(x - y);
    if (gap < 1e-12) continue;
    best = std::max(best, measure(T.apply(x) - T.apply(y)) / gap);
    ++used;
  }
  if (used == 0) throw std::invalid_argument("lipschitz sample: every pair was degenerate");

  LipschitzEstimate est;
  est.value = best;
  est.method = LipschitzMethod::PairSampling;
  est.samples = used;
  est.seed = seed;
  est.is_upper_bound = false;
  return est;
}

LipschitzEstimate derivative_bound_lipschitz(const Operator& T, const Ball& region,
                                             std::size_t n_samples, std::uint64_t seed) {
  if (!(region.radius > 0.0)) throw std::invalid_argument("derivative bound: radius must be positive");
  if (n_samples < 1) throw std::invalid_argument("derivative bound: need at least one sample");
  const Index n = T.dim();
  const Vector center = region.center.size() == 0 ? Vector::Zero(n) : region.center;
  if (center.size() != n) throw std::invalid_argument("derivative bound: center has the wrong length");

  const bool analytic = T.jacobian(center).has_value();
  if (!analytic && n > kMaxFdJacobianDim)
    throw std::invalid_argument("derivative bound: no analytic derivative and " + std::to_string(n) +
                                " coordinates exceed the finite-difference limit of " +
                                std::to_string(kMaxFdJacobianDim));

  Rng rng(seed);
  double best = 0.0;
  for (std::size_t k = 0; k < n_samples; ++k) {
    const Vector u = center + (k % 2 == 0 ? rng.on_sphere(n, region.radius)
                                          : rng.in_ball(n, region.radius));
    const Matrix J = analytic ? *T.jacobian(u) : fd_jacobian(T, u);
    best = std::max(best, spectral_norm(J));
  }

  LipschitzEstimate est;
  est.value = best;
  est.method = LipschitzMethod::DerivativeBound;
  est.samples = n_samples;
  est.seed = seed;
  est.is_upper_bound = false;
  return est;
}

std::vector<Index> neighborhood_membership(const Graph& graph) {
  std::vector<Index> alpha(static_cast<std::size_t>(graph.size()), 0);
  for (Index v = 0; v < graph.size(); ++v)
    for (Index i : graph.neighborhood(v)) ++alpha[static_cast<std::size_t>(i)];
  return alpha;
}

GnnLipschitzReport gnn_lipschitz_report(const GnnAggregateOperator& op) {
  GnnLipschitzReport r;
  r.L = spectral_norm(op.weight());
  r.coefficients = neighborhood_membership(op.graph());
  for (Index a : r.coefficients) r.alpha_max = std::max(r.alpha_max, a);
  r.product = r.L * static_cast<double>(r.alpha_max);
  r.certified = r.product < 1.0;
  return r;
}

Matrix rescale_to_contraction(const Matrix& W, Index alpha_max, double target) {
  if (!(target > 0.0 && target < 1.0)) throw std::invalid_argument("rescale: target must lie in (0, 1)");
  if (alpha_max < 1) throw std::invalid_argument("rescale: alpha_max must be at least 1");
  const double L = spectral_norm(W);
  if (L == 0.0) throw std::invalid_argument("rescale: zero matrix cannot be rescaled");
  return W * (target / (L * static_cast<double>(alpha_max)));
}

}  // namespace fixpoint
