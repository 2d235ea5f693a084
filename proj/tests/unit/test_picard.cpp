#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include <Eigen/LU>
#include <Eigen/SVD>

#include "fixpoint/operators.hpp"
#include "fixpoint/picard.hpp"
#include "fixpoint/random.hpp"

using namespace fixpoint;

namespace {

Matrix random_contraction(Rng& rng, Index d, double k) {
  const Matrix A = rng.normal_matrix(d, d);
  return A * (k / Eigen::JacobiSVD<Matrix>(A).singularValues()(0));
}

Vector dense_fixed_point(const Matrix& A, const Vector& rhs) {
  return (Matrix::Identity(A.rows(), A.cols()) - A).partialPivLu().solve(rhs);
}

PicardConfig config(double lambda, double eps, int max_iter) {
  PicardConfig cfg;
  cfg.lambda = lambda;
  cfg.epsilon = eps;
  cfg.max_iter = max_iter;
  return cfg;
}

}  // namespace

TEST(PicardConfig, Validation) {
  PicardConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.lambda = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = PicardConfig{};
  cfg.epsilon = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = PicardConfig{};
  cfg.smoothing = 1.5;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = PicardConfig{};
  cfg.max_iter = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(PicardSolve, ZeroOperatorConvergesInOneStep) {
  const AffineOperator zero = AffineOperator::zero(3);
  Vector f(3);
  f << 1, 2, 3;
  const SolveResult r = picard_solve(zero, config(0.5, 1e-12, 100), f);
  EXPECT_TRUE(r.trace.converged);
  EXPECT_EQ(r.trace.iterations_used, 1);
  EXPECT_EQ(r.solution, f);
  EXPECT_EQ(r.trace.steps[0].residual, 0.0);
  EXPECT_EQ(residual(zero, 0.5, f, r.solution), 0.0);
}

TEST(PicardSolve, ScaledIdentityGeometricLimit) {
  const AffineOperator id = AffineOperator::identity(1);
  const Vector f = Vector::Ones(1);
  PicardConfig cfg = config(0.5, 1e-300, 40);
  const SolveResult r = picard_solve(id, cfg, f);
  EXPECT_FALSE(r.trace.converged);
  EXPECT_EQ(r.trace.iterations_used, 40);
  EXPECT_LT(std::abs(r.solution(0) - 2.0), 1e-12);
}

TEST(PicardSolve, MatchesDenseSolve) {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix A = random_contraction(rng, 8, 0.8);
    const AffineOperator op(A, Vector::Zero(8));
    const Vector f = rng.normal_vector(8);
    const SolveResult r = picard_solve(op, config(1.0, 1e-12, 1000), f);
    ASSERT_TRUE(r.trace.converged);
    EXPECT_LE((r.solution - dense_fixed_point(A, f)).norm(), 1e-10);
  }
}

TEST(PicardSolve, DoWhileAlwaysRunsFirstUpdate) {
  const AffineOperator id = AffineOperator::identity(2);
  const SolveResult r = picard_solve(id, config(1.0, 1.0, 10), Vector::Zero(2));
  EXPECT_EQ(r.trace.steps.size(), 1u);
  EXPECT_TRUE(r.trace.converged);
}

TEST(PicardSolve, TraceInvariants) {
  Rng rng(2);
  const AffineOperator op(random_contraction(rng, 5, 0.9), rng.normal_vector(5));
  PicardConfig cfg = config(1.0, 1e-9, 500);
  const SolveResult r = picard_solve(op, cfg, rng.normal_vector(5));
  for (std::size_t i = 0; i < r.trace.steps.size(); ++i) {
    const auto& s = r.trace.steps[i];
    EXPECT_EQ(s.index, static_cast<int>(i));
    EXPECT_GE(s.step_norm, 0.0);
    EXPECT_GE(s.residual, 0.0);
  }
  EXPECT_EQ(r.trace.converged, r.trace.steps.back().step_norm <= cfg.epsilon);
  EXPECT_EQ(r.trace.iterations_used, static_cast<int>(r.trace.steps.size()));
}

TEST(PicardSolve, PlainIterationStepEqualsResidual) {
  Rng rng(5);
  const AffineOperator op(random_contraction(rng, 4, 0.7), rng.normal_vector(4));
  const SolveResult r = picard_solve(op, config(1.0, 1e-10, 200), rng.normal_vector(4));
  for (const auto& s : r.trace.steps) EXPECT_NEAR(s.step_norm, s.residual, 1e-15 * (1 + s.residual));
}

TEST(PicardSolve, DivergenceIsDetected) {
  const AffineOperator grow(2.0 * Matrix::Identity(3, 3), Vector::Ones(3));
  try {
    picard_solve(grow, config(1.0, 1e-10, 1000), Vector::Zero(3));
    FAIL() << "expected divergence";
  } catch (const IterationDiverged& e) {
    EXPECT_FALSE(e.trace().steps.empty());
    EXPECT_LT(e.trace().iterations_used, 1000);
  }
}

TEST(PicardSolve, MaxIterWithoutConvergence) {
  const AffineOperator slow(0.999 * Matrix::Identity(2, 2), Vector::Ones(2));
  const SolveResult r = picard_solve(slow, config(1.0, 1e-12, 1), Vector::Zero(2));
  EXPECT_FALSE(r.trace.converged);
  EXPECT_EQ(r.trace.steps.size(), 1u);
}

TEST(PicardSolve, ResidualStopRule) {
  Rng rng(9);
  const AffineOperator op(random_contraction(rng, 4, 0.6), rng.normal_vector(4));
  PicardConfig cfg = config(1.0, 1e-10, 500);
  cfg.smoothing = 0.5;
  cfg.stop = StopRule::Residual;
  const Vector f = rng.normal_vector(4);
  const SolveResult r = picard_solve(op, cfg, f);
  ASSERT_TRUE(r.trace.converged);
  EXPECT_LE(r.trace.steps.back().residual, cfg.epsilon);
  EXPECT_EQ(parse_stop_rule(to_string(StopRule::Residual)), StopRule::Residual);
}

TEST(Residual, KnownValues) {
  Rng rng(14);
  const Matrix A = random_contraction(rng, 6, 0.5);
  const Vector b = rng.normal_vector(6), f = rng.normal_vector(6);
  const AffineOperator op(A, b);
  EXPECT_LE(residual(op, 1.0, f, dense_fixed_point(A, b + f)), 1e-12);
  const AffineOperator zero = AffineOperator::zero(6);
  EXPECT_EQ(residual(zero, 2.0, f, f), 0.0);
  const AffineOperator id = AffineOperator::identity(1);
  EXPECT_EQ(residual(id, 1.0, Vector::Zero(1), Vector::Ones(1)), 0.0);
}

TEST(PredictedIterations, HandValues) {
  EXPECT_EQ(predicted_iterations(0.5, 1.0, 0.0, 1e-3), 0);
  EXPECT_EQ(predicted_iterations(0.5, 1.0, 1.0, 0.1), 4);
  EXPECT_EQ(predicted_iterations(0.9, 0.5, 2.0, 1e-6), 19);
  EXPECT_THROW(predicted_iterations(1.0, 1.0, 1.0, 0.1), std::invalid_argument);
  EXPECT_THROW(predicted_iterations(0.6, -2.0, 1.0, 0.1), std::invalid_argument);
}

TEST(PredictedIterations, IsSmallestSufficientCount) {
  Rng rng(77);
  for (int i = 0; i < 500; ++i) {
    const double k = rng.uniform(0.01, 0.99);
    const double lambda = rng.uniform(-1.0, 1.0);
    const double m = rng.uniform(0.0, 100.0);
    const double eps = std::pow(10.0, -rng.uniform(1.0, 12.0));
    const int nu = predicted_iterations(k, lambda, m, eps);
    const double q = std::abs(lambda) * k;
    EXPECT_LT(std::pow(q, nu) * m, eps);
    if (nu > 0) EXPECT_GE(std::pow(q, nu - 1) * m, eps);
  }
}

TEST(BanachBounds, ScalarHandValues) {
  const AffineOperator op(0.5 * Matrix::Identity(1, 1), Vector::Ones(1));
  PicardConfig cfg = config(1.0, 1e-300, 10);
  cfg.record_iterates = true;
  const SolveResult r = picard_solve(op, cfg, Vector::Zero(1));
  const auto bounds = banach_bounds(r.trace, 0.5, Vector(Vector::Constant(1, 2.0)));
  ASSERT_EQ(bounds.size(), 11u);
  EXPECT_DOUBLE_EQ(bounds[0].apriori_bound, 2.0);
  EXPECT_FALSE(bounds[0].aposteriori_bound.has_value());
  EXPECT_DOUBLE_EQ(bounds[2].apriori_bound, 0.5);
  EXPECT_DOUBLE_EQ(*bounds[2].aposteriori_bound, 0.5);
  EXPECT_DOUBLE_EQ(*bounds[2].actual_error, 0.5);  // u_2 = 1.5
  EXPECT_DOUBLE_EQ(*bounds[3].actual_error, 0.25);
}

TEST(BanachBounds, DominateActualErrorOnRandomContractions) {
  Rng rng(101);
  for (int trial = 0; trial < 50; ++trial) {
    const Index d = 1 + static_cast<Index>(rng.index(12));
    const double k = rng.uniform(0.1, 0.95);
    const Matrix A = random_contraction(rng, d, k);
    const Vector b = rng.normal_vector(d), f = rng.normal_vector(d);
    const AffineOperator op(A, b);
    PicardConfig cfg = config(1.0, 1e-11, 2000);
    cfg.record_iterates = true;
    const SolveResult r = picard_solve(op, cfg, f);
    const auto bounds = banach_bounds(r.trace, k, dense_fixed_point(A, b + f));
    for (const auto& rec : bounds) {
      const double slack = 1e-12 * (1.0 + *rec.actual_error);
      EXPECT_LE(*rec.actual_error, rec.apriori_bound + slack) << "n=" << rec.n;
      if (rec.aposteriori_bound) EXPECT_LE(*rec.actual_error, *rec.aposteriori_bound + slack) << "n=" << rec.n;
    }
  }
}

TEST(BanachBounds, RejectsBadInput) {
  const AffineOperator op = AffineOperator::zero(1);
  PicardConfig cfg = config(1.0, 1e-10, 5);
  const SolveResult r = picard_solve(op, cfg, Vector::Ones(1));
  EXPECT_THROW(banach_bounds(r.trace, 1.0), std::invalid_argument);
  EXPECT_THROW(banach_bounds(r.trace, 0.0), std::invalid_argument);
  EXPECT_THROW(banach_bounds(r.trace, 0.5, Vector(Vector::Zero(1))), std::invalid_argument);
}

TEST(Uniqueness, ContractionIdentityAndZero) {
  Rng rng(3);
  const AffineOperator op(random_contraction(rng, 5, 0.8), rng.normal_vector(5));
  const PicardConfig cfg = config(1.0, 1e-11, 2000);
  const auto u = uniqueness_check(op, cfg, rng.normal_vector(5), rng.normal_vector(5), rng.normal_vector(5));
  EXPECT_TRUE(u.unique);
  EXPECT_LE(u.distance, 10 * cfg.epsilon);

  const AffineOperator id = AffineOperator::identity(1);
  const auto v = uniqueness_check(id, config(1.0, 1e-10, 10), Vector::Zero(1), Vector::Zero(1), Vector::Ones(1));
  EXPECT_FALSE(v.unique);
  EXPECT_DOUBLE_EQ(v.distance, 1.0);

  const AffineOperator zero = AffineOperator::zero(2);
  EXPECT_TRUE(uniqueness_check(zero, cfg, Vector::Ones(2), Vector::Zero(2), 5 * Vector::Ones(2)).unique);
}

TEST(DampedSolve, ExtremesAndInvariance) {
  Rng rng(17);
  const Matrix A = random_contraction(rng, 6, 0.8);
  const Vector b = rng.normal_vector(6);
  const AffineOperator op(A, b);
  const Vector x0 = rng.normal_vector(6);

  const SolveResult frozen = damped_solve(op, 1.0, x0, 1e-12, 100);
  EXPECT_EQ(frozen.solution, x0);
  EXPECT_EQ(frozen.trace.iterations_used, 1);
  EXPECT_EQ(frozen.trace.steps[0].step_norm, 0.0);

  PicardConfig plain = config(1.0, 1e-11, 5000);
  const SolveResult p = picard_solve_from(op, plain, Vector::Zero(6), x0);
  const SolveResult d0 = damped_solve(op, 0.0, x0, 1e-11, 5000);
  EXPECT_EQ(p.solution, d0.solution);

  const SolveResult d5 = damped_solve(op, 0.5, x0, 1e-11, 5000);
  const Vector star = dense_fixed_point(A, b);
  EXPECT_LE((d5.solution - d0.solution).norm(), 10 * 1e-11);
  EXPECT_LE((d5.solution - star).norm(), 1e-9);
}

TEST(DampedSolve, FixedPointIsFixedForEveryMix) {
  Rng rng(23);
  const Matrix A = random_contraction(rng, 5, 0.9);
  const Vector b = rng.normal_vector(5);
  const AffineOperator op(A, b);
  const Vector star = dense_fixed_point(A, b);
  for (double mix : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    const Vector next = mix * star + (1.0 - mix) * op.apply(star);
    EXPECT_LE((next - star).norm(), 1e-12);
  }
}

TEST(DampedSolve, SmoothedMapContractionConstant) {
  Rng rng(29);
  const double k = 0.7;
  const AffineOperator op(random_contraction(rng, 4, k), rng.normal_vector(4));
  for (double alpha : {0.0, 0.3, 0.6, 0.9}) {
    auto step = [&](const Vector& x) { return Vector(alpha * x + (1 - alpha) * op.apply(x)); };
    for (int i = 0; i < 200; ++i) {
      const Vector x = rng.normal_vector(4), y = rng.normal_vector(4);
      EXPECT_LE((step(x) - step(y)).norm(), (alpha + (1 - alpha) * k) * (x - y).norm() * (1 + 1e-12));
    }
  }
}

TEST(GeometricDecay, StepRatioBoundedByContraction) {
  Rng rng(41);
  for (int trial = 0; trial < 30; ++trial) {
    const double k = rng.uniform(0.3, 0.95);
    const double lambda = rng.uniform(0.5, 1.0) * (rng.bernoulli(0.5) ? 1 : -1);
    const AffineOperator op(random_contraction(rng, 6, k), rng.normal_vector(6));
    const SolveResult r = picard_solve(op, config(lambda, 1e-11, 5000), rng.normal_vector(6));
    for (std::size_t i = 1; i < r.trace.steps.size(); ++i)
      EXPECT_LE(r.trace.steps[i].step_norm, std::abs(lambda) * k * r.trace.steps[i - 1].step_norm * (1 + 1e-9));
  }
}

TEST(ResolveNorm, DirectSumUsesOperatorLayout) {
  const GnnAggregateOperator op(Graph(3, {{0, 1}}), Matrix::Identity(2, 2));
  const Norm n = resolve_norm(NormKind::DirectSum, op);
  EXPECT_EQ(n.block_dims(), (std::vector<Index>{2, 2, 2}));
  EXPECT_EQ(resolve_norm(NormKind::Sup, op).kind(), NormKind::Sup);
}
