#include "fixpoint/picard.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fixpoint {

std::string to_string(StopRule rule) { return rule == StopRule::Residual ? "residual" : "step"; }

StopRule parse_stop_rule(std::string_view name) {
  if (name == "step") return StopRule::StepNorm;
  if (name == "residual") return StopRule::Residual;
  throw std::invalid_argument("unknown stop rule '" + std::string(name) + "'");
}

void PicardConfig::validate() const {
  if (lambda == 0.0 || !std::isfinite(lambda)) throw std::invalid_argument("picard: lambda must be finite and nonzero");
  if (!(epsilon > 0.0)) throw std::invalid_argument("picard: epsilon must be positive");
  if (max_iter < 1) throw std::invalid_argument("picard: max_iter must be at least 1");
  if (!(smoothing >= 0.0 && smoothing <= 1.0)) throw std::invalid_argument("picard: smoothing must lie in [0, 1]");
}

Norm resolve_norm(NormKind kind, const Operator& T) {
  switch (kind) {
    case NormKind::L2: return Norm::l2();
    case NormKind::Sup: return Norm::sup();
    case NormKind::DirectSum: break;
  }
  Norm natural = T.natural_norm();
  if (natural.kind() == NormKind::DirectSum) return natural;
  // A space without block structure is a one-block direct sum.
  return Norm::direct_sum({T.dim()});
}

SolveResult iterate(const Operator& T, const PicardConfig& cfg, const Vector* f, Vector x0) {
  cfg.validate();
  if (x0.size() != T.dim()) throw std::invalid_argument("picard: start vector has the wrong length");
  if (f && f->size() != T.dim()) throw std::invalid_argument("picard: f has the wrong length");
  if (!x0.allFinite()) throw std::invalid_argument("picard: non-finite start vector");

  const Norm norm = resolve_norm(cfg.norm_kind, T);
  const double alpha = cfg.smoothing;

  SolveResult out;
  IterationTrace& trace = out.trace;
  Vector x = std::move(x0);
  if (cfg.record_iterates) trace.iterates.push_back(x);

  double first_step = 0.0;
  for (int k = 0; k < cfg.max_iter; ++k) {
    Vector z;
    try {
      z = cfg.lambda * T.apply(x);
    } catch (const DivergenceError& e) {
      throw IterationDiverged(std::string("picard: ") + e.what() + " at iteration " + std::to_string(k),
                              trace);
    }
    if (f) z += *f;

    IterationStep rec;
    rec.index = k;
    rec.residual = norm(z - x);
    Vector next = alpha == 0.0 ? std::move(z) : Vector(alpha * x + (1.0 - alpha) * z);
    rec.step_norm = norm(next - x);

    if (!next.allFinite() || !std::isfinite(rec.step_norm) || !std::isfinite(rec.residual))
      throw IterationDiverged("picard: non-finite iterate at iteration " + std::to_string(k), trace);
    if (k == 0) first_step = rec.step_norm;
    else if (rec.step_norm > kDivergenceFactor * first_step && first_step > 0.0)
      throw IterationDiverged("picard: step norm grew past 1e12 times the first step at iteration " + std::to_string(k),
                              trace);

    trace.steps.push_back(rec);
    x = std::move(next);
    trace.iterations_used = k + 1;
    if (cfg.record_iterates) trace.iterates.push_back(x);

    const double measure = cfg.stop == StopRule::StepNorm ? rec.step_norm : rec.residual;
    if (measure <= cfg.epsilon) {
      trace.converged = true;
      break;
    }
  }
  out.solution = std::move(x);
  return out;
}

SolveResult picard_solve(const Operator& T, const PicardConfig& cfg, const Vector& f) {
  return iterate(T, cfg, &f, f);
}

SolveResult picard_solve_from(const Operator& T, const PicardConfig& cfg, const Vector& f,
                              const Vector& x0) {
  return iterate(T, cfg, &f, x0);
}

SolveResult damped_solve(const Operator& T, double lambda_mix, const Vector& x0, double epsilon,
                         int max_iter, NormKind norm_kind, StopRule stop) {
  if (!(lambda_mix >= 0.0 && lambda_mix <= 1.0))
    throw std::invalid_argument("damped solve: lambda_mix must lie in [0, 1]");
  PicardConfig cfg;
  cfg.lambda = 1.0;
  cfg.smoothing = lambda_mix;
  cfg.epsilon = epsilon;
  cfg.max_iter = max_iter;
  cfg.norm_kind = norm_kind;
  cfg.stop = stop;
  return iterate(T, cfg, nullptr, x0);
}

double residual(const Operator& T, double lambda, const Vector& f, const Vector& x, const Norm& norm) {
  if (f.size() != x.size()) throw std::invalid_argument("residual: f and x differ in length");
  return norm(lambda * T.apply(x) + f - x);
}

double residual(const Operator& T, double lambda, const Vector& f, const Vector& x) {
  return residual(T, lambda, f, x, T.natural_norm());
}

int predicted_iterations(double k, double lambda, double norm_Tf, double epsilon) {
  const double q = std::abs(lambda) * k;
  if (!(k >= 0.0) || !(q < 1.0)) throw std::invalid_argument("predicted iterations: need |lambda| k < 1");
  if (!(norm_Tf >= 0.0)) throw std::invalid_argument("predicted iterations: norm of T(f) must be nonnegative");
  if (!(epsilon > 0.0)) throw std::invalid_argument("predicted iterations: epsilon must be positive");
  if (norm_Tf < epsilon) return 0;
  if (q == 0.0) return 1;

  // Start just below the logarithmic estimate and walk up with exact powers.
  int nu = static_cast<int>(std::floor(std::log(epsilon / norm_Tf) / std::log(q)));
  nu = std::max(nu - 2, 0);
  while (!(std::pow(q, nu) * norm_Tf < epsilon)) ++nu;
  while (nu > 0 && std::pow(q, nu - 1) * norm_Tf < epsilon) --nu;
  return nu;
}

std::vector<BanachBoundRecord> banach_bounds(const IterationTrace& trace, double k,
                                             const std::optional<Vector>& reference, const Norm& norm) {
  if (!(k > 0.0 && k < 1.0)) throw std::invalid_argument("banach bounds: need 0 < k < 1");
  if (trace.steps.empty()) throw std::invalid_argument("banach bounds: empty trace");
  if (reference && trace.iterates.size() != trace.steps.size() + 1)
    throw std::invalid_argument("banach bounds: actual error needs recorded iterates");

  const double first = trace.steps.front().step_norm;
  std::vector<BanachBoundRecord> out;
  out.reserve(trace.steps.size() + 1);
  for (std::size_t n = 0; n <= trace.steps.size(); ++n) {
    BanachBoundRecord r;
    r.n = static_cast<int>(n);
    r.apriori_bound = std::pow(k, static_cast<double>(n)) / (1.0 - k) * first;
    if (n >= 1) r.aposteriori_bound = k / (1.0 - k) * trace.steps[n - 1].step_norm;
    if (reference) r.actual_error = norm(trace.iterates[n] - *reference);
    out.push_back(r);
  }
  return out;
}

UniquenessResult uniqueness_check(const Operator& T, const PicardConfig& cfg, const Vector& f,
                                  const Vector& start_a, const Vector& start_b) {
  UniquenessResult r;
  r.first = picard_solve_from(T, cfg, f, start_a);
  r.second = picard_solve_from(T, cfg, f, start_b);
  r.distance = resolve_norm(cfg.norm_kind, T)(r.first.solution - r.second.solution);
  r.unique = r.first.trace.converged && r.second.trace.converged && r.distance <= 10.0 * cfg.epsilon;
  return r;
}

}  // namespace fixpoint
