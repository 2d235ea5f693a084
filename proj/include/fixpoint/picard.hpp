#pragma once

#include <optional>
#include <vector>

#include "fixpoint/function_space.hpp"
#include "fixpoint/operators.hpp"

namespace fixpoint {

/// Which quantity ends the iteration. StepNorm tests ||x_{k+1} - x_k||,
/// Residual tests ||lambda T(x_k) + f - x_k||. Both are always recorded.
enum class StopRule { StepNorm, Residual };

std::string to_string(StopRule rule);
StopRule parse_stop_rule(std::string_view name);

struct PicardConfig {
  double lambda = 1.0;
  double epsilon = 1e-10;
  int max_iter = 1000;
  double smoothing = 0.0;  // alpha; 0 is plain Picard
  NormKind norm_kind = NormKind::L2;
  StopRule stop = StopRule::StepNorm;
  bool record_iterates = false;

  void validate() const;
};

struct IterationStep {
  int index = 0;
  double step_norm = 0.0;  // ||x_{k+1} - x_k||
  double residual = 0.0;   // ||lambda T(x_k) + f - x_k||
};

struct IterationTrace {
  std::vector<IterationStep> steps;
  bool converged = false;
  int iterations_used = 0;
  /// x_0 ... x_n, filled only when PicardConfig::record_iterates is set.
  std::vector<Vector> iterates;
};

struct SolveResult {
  Vector solution;
  IterationTrace trace;
};

/// An iteration produced non-finite values or its step norm grew beyond
/// kDivergenceFactor times the first step. Carries the partial trace.
class IterationDiverged : public DivergenceError {
 public:
  IterationDiverged(const std::string& what, IterationTrace trace)
      : DivergenceError(what), trace_(std::move(trace)) {}
  const IterationTrace& trace() const { return trace_; }

 private:
  IterationTrace trace_;
};

inline constexpr double kDivergenceFactor = 1e12;

/// Resolve a norm kind against an operator's space; direct-sum takes the
/// block layout from the operator.
Norm resolve_norm(NormKind kind, const Operator& T);

/// The shared engine:
///   x_{k+1} = alpha x_k + (1 - alpha) (f + lambda T(x_k))
/// starting from x0, with f = 0 when absent. The first update always runs;
/// afterwards the loop stops on the configured rule or at max_iter.
SolveResult iterate(const Operator& T, const PicardConfig& cfg, const Vector* f, Vector x0);

/// Picard iteration y_0 = f, y_{k+1} = f + lambda T(y_k) (smoothed when
/// cfg.smoothing > 0).
SolveResult picard_solve(const Operator& T, const PicardConfig& cfg, const Vector& f);

/// Same iteration started from an arbitrary x0.
SolveResult picard_solve_from(const Operator& T, const PicardConfig& cfg, const Vector& f,
                              const Vector& x0);

/// Damped update x_{i+1} = (1 - lambda_mix) T(x_i) + lambda_mix x_i.
SolveResult damped_solve(const Operator& T, double lambda_mix, const Vector& x0, double epsilon,
                         int max_iter, NormKind norm_kind = NormKind::L2,
                         StopRule stop = StopRule::StepNorm);

double residual(const Operator& T, double lambda, const Vector& f, const Vector& x, const Norm& norm);
double residual(const Operator& T, double lambda, const Vector& f, const Vector& x);

/// Smallest nu with (|lambda| k)^nu * norm_Tf < epsilon; 0 when norm_Tf is 0.
/// Passing an operator bound M as norm_Tf gives a count that holds for every f.
int predicted_iterations(double k, double lambda, double norm_Tf, double epsilon);

struct BanachBoundRecord {
  int n = 0;
  double apriori_bound = 0.0;                 // k^n / (1 - k) ||u_0 - u_1||
  std::optional<double> aposteriori_bound;    // k / (1 - k) ||u_{n-1} - u_n||, n >= 1
  std::optional<double> actual_error;         // ||u_n - u*||
};

/// A priori and a posteriori error bounds for each iterate u_0 ... u_n of a
/// trace, for a contraction constant 0 < k < 1. actual_error is filled when
/// a reference fixed point is given (needs recorded iterates).
std::vector<BanachBoundRecord> banach_bounds(const IterationTrace& trace, double k,
                                             const std::optional<Vector>& reference = std::nullopt,
                                             const Norm& norm = Norm::l2());

struct UniquenessResult {
  bool unique = false;
  double distance = 0.0;
  SolveResult first;
  SolveResult second;
};

/// Run the iteration from two starts; unique iff both converge and the end
/// points are within 10 epsilon.
UniquenessResult uniqueness_check(const Operator& T, const PicardConfig& cfg, const Vector& f,
                                  const Vector& start_a, const Vector& start_b);

}  // namespace fixpoint
