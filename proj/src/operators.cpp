#include "fixpoint/operators.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "fixpoint/calculus.hpp"

namespace fixpoint {

Vector Operator::apply(const Vector& x) const {
  if (x.size() != dim())
    throw std::invalid_argument(name() + ": input has " + std::to_string(x.size()) +
                                " coordinates, expected " + std::to_string(dim()));
  Vector out = evaluate(x);
  if (out.size() != dim()) throw std::logic_error(name() + ": output length differs from dim()");
  if (!out.allFinite()) throw DivergenceError(name() + ": non-finite output");
  return out;
}

Vector apply(const Operator& op, const Vector& x) { return op.apply(x); }

// ---------------------------------------------------------------------------

AffineOperator::AffineOperator(Matrix A, Vector b) : A_(std::move(A)), b_(std::move(b)) {
  if (A_.rows() != A_.cols()) throw std::invalid_argument("affine: matrix must be square");
  if (b_.size() != A_.rows()) throw std::invalid_argument("affine: offset length mismatch");
  if (!A_.allFinite() || !b_.allFinite()) throw std::invalid_argument("affine: non-finite entry");
}

AffineOperator AffineOperator::zero(Index d) { return {Matrix::Zero(d, d), Vector::Zero(d)}; }

AffineOperator AffineOperator::identity(Index d) {
  return {Matrix::Identity(d, d), Vector::Zero(d)};
}

Vector AffineOperator::evaluate(const Vector& x) const { return A_ * x + b_; }

std::optional<Matrix> AffineOperator::jacobian(const Vector&) const { return A_; }

std::optional<double> AffineOperator::lipschitz_bound() const { return spectral_norm(A_); }

std::optional<double> AffineOperator::output_bound() const {
  if (A_.isZero(0.0)) return b_.norm();
  return std::nullopt;
}

// ---------------------------------------------------------------------------

AttentionOperator::AttentionOperator(Matrix Wq, Matrix Wk, Matrix Wv, Index tokens)
    : Wq_(std::move(Wq)), Wk_(std::move(Wk)), Wv_(std::move(Wv)), tokens_(tokens) {
  const Index d = Wq_.rows();
  for (const Matrix* W : {&Wq_, &Wk_, &Wv_}) {
    if (W->rows() != d || W->cols() != d)
      throw std::invalid_argument("attention: Wq, Wk, Wv must be square of equal size");
    if (!W->allFinite()) throw std::invalid_argument("attention: non-finite weight");
  }
  if (d < 1) throw std::invalid_argument("attention: empty weights");
  if (tokens_ < 1) throw std::invalid_argument("attention: need at least one token");
}

void AttentionOperator::check_tokens(const Matrix& Y) const {
  if (Y.cols() != width())
    throw std::invalid_argument("attention: token width " + std::to_string(Y.cols()) +
                                " does not match weights " + std::to_string(width()));
}

Matrix AttentionOperator::attend(const Matrix& Y) const {
  check_tokens(Y);
  const Matrix Q = Y * Wq_;
  const Matrix K = Y * Wk_;
  const Matrix V = Y * Wv_;
  return Q * (K.transpose() * V);
}

Matrix AttentionOperator::frechet(const Matrix& Y, const Matrix& H) const {
  check_tokens(Y);
  if (H.rows() != Y.rows() || H.cols() != Y.cols())
    throw std::invalid_argument("attention: direction shape differs from input");
  const Matrix Q = Y * Wq_, K = Y * Wk_, V = Y * Wv_;
  const Matrix dQ = H * Wq_, dK = H * Wk_, dV = H * Wv_;
  return dQ * (K.transpose() * V) + Q * (dK.transpose() * V) + Q * (K.transpose() * dV);
}

Matrix AttentionOperator::unflatten(const Vector& x) const {
  if (x.size() != dim()) throw std::invalid_argument("attention: flat input length mismatch");
  Matrix Y(tokens_, width());
  for (Index i = 0; i < tokens_; ++i)
    for (Index j = 0; j < width(); ++j) Y(i, j) = x(i * width() + j);
  return Y;
}

Vector AttentionOperator::flatten(const Matrix& Y) {
  Vector x(Y.size());
  for (Index i = 0; i < Y.rows(); ++i)
    for (Index j = 0; j < Y.cols(); ++j) x(i * Y.cols() + j) = Y(i, j);
  return x;
}

Vector AttentionOperator::evaluate(const Vector& x) const { return flatten(attend(unflatten(x))); }

std::optional<Matrix> AttentionOperator::jacobian(const Vector& x) const {
  const Matrix Y = unflatten(x);
  Matrix J(dim(), dim());
  Matrix E = Matrix::Zero(tokens_, width());
  for (Index c = 0; c < dim(); ++c) {
    E(c / width(), c % width()) = 1.0;
    J.col(c) = flatten(frechet(Y, E));
    E(c / width(), c % width()) = 0.0;
  }
  return J;
}

Matrix attention_apply(const AttentionOperator& op, const Matrix& Y) {
  Matrix out = op.attend(Y);
  if (!out.allFinite()) throw DivergenceError("attention: non-finite output");
  return out;
}

// ---------------------------------------------------------------------------

std::string to_string(Nonlinearity phi) { return phi == Nonlinearity::Tanh ? "tanh" : "linear"; }

Nonlinearity parse_nonlinearity(std::string_view name) {
  if (name == "linear") return Nonlinearity::Linear;
  if (name == "tanh") return Nonlinearity::Tanh;
  throw std::invalid_argument("unknown nonlinearity '" + std::string(name) + "'");
}

namespace {

double phi_value(Nonlinearity phi, double y) { return phi == Nonlinearity::Tanh ? std::tanh(y) : y; }

double phi_slope(Nonlinearity phi, double y) {
  if (phi == Nonlinearity::Linear) return 1.0;
  const double c = std::cosh(y);
  return 1.0 / (c * c);
}

}  // namespace

HammersteinKernel::HammersteinKernel(std::string name, KernelFn kernel, Nonlinearity phi,
                                     Vector params)
    : name_(std::move(name)), kernel_(std::move(kernel)), phi_(phi), params_(std::move(params)) {}

HammersteinKernel HammersteinKernel::table(Matrix values, Nonlinearity phi) {
  if (!values.allFinite()) throw std::invalid_argument("kernel table: non-finite entry");
  HammersteinKernel k("table", nullptr, phi);
  k.table_ = std::move(values);
  return k;
}

HammersteinKernel HammersteinKernel::from_registry(const std::string& name, const Vector& params,
                                                   Nonlinearity phi) {
  auto need = [&](Index count) {
    if (params.size() != count)
      throw std::invalid_argument("kernel '" + name + "' takes " + std::to_string(count) +
                                  " parameter(s)");
  };
  if (name == "zero") {
    need(0);
    return {name, [](double, double) { return 0.0; }, phi, params};
  }
  if (name == "product") {
    need(1);
    const double c = params(0);
    return {name, [c](double t, double s) { return c * t * s; }, phi, params};
  }
  if (name == "constant") {
    need(1);
    const double c = params(0);
    return {name, [c](double, double) { return c; }, phi, params};
  }
  if (name == "exponential") {
    need(2);
    const double c = params(0), ell = params(1);
    if (!(ell > 0.0)) throw std::invalid_argument("kernel 'exponential' needs ell > 0");
    return {name, [c, ell](double t, double s) { return c * std::exp(-std::abs(t - s) / ell); },
            phi, params};
  }
  throw std::invalid_argument("unknown kernel '" + name + "'");
}

double HammersteinKernel::evaluate(double y, double t, double s) const {
  if (table_) throw std::logic_error("kernel table has no pointwise form; use sample()");
  return kernel_(t, s) * phi_value(phi_, y);
}

Matrix HammersteinKernel::sample(const Grid& grid) const {
  const Index n = grid.size();
  if (table_) {
    if (table_->rows() != n || table_->cols() != n)
      throw std::invalid_argument("kernel table is " + std::to_string(table_->rows()) + "x" +
                                  std::to_string(table_->cols()) + ", grid has " +
                                  std::to_string(n) + " points");
    return *table_;
  }
  Matrix K(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) K(i, j) = kernel_(grid.points()(i), grid.points()(j));
  if (!K.allFinite()) throw std::invalid_argument("kernel '" + name_ + "' is not finite on the grid");
  return K;
}

HammersteinOperator::HammersteinOperator(Grid grid, HammersteinKernel kernel)
    : grid_(std::move(grid)), kernel_(std::move(kernel)) {
  weighted_ = kernel_.sample(grid_) * grid_.weights().asDiagonal();
}

Vector HammersteinOperator::evaluate(const Vector& x) const {
  Vector phi(x.size());
  for (Index j = 0; j < x.size(); ++j) phi(j) = phi_value(kernel_.nonlinearity(), x(j));
  return weighted_ * phi;
}

GridFunction HammersteinOperator::apply_grid(const GridFunction& y) const {
  if (!(y.grid() == grid_)) throw std::invalid_argument("hammerstein: function lives on another grid");
  return GridFunction(grid_, apply(y.values()));
}

std::optional<Matrix> HammersteinOperator::jacobian(const Vector& x) const {
  Vector slope(x.size());
  for (Index j = 0; j < x.size(); ++j) slope(j) = phi_slope(kernel_.nonlinearity(), x(j));
  return Matrix(weighted_ * slope.asDiagonal());
}

std::optional<double> HammersteinOperator::lipschitz_bound() const {
  // Both nonlinearities are 1-Lipschitz.
  return spectral_norm(weighted_);
}

std::optional<double> HammersteinOperator::output_bound() const {
  if (kernel_.nonlinearity() != Nonlinearity::Tanh) return std::nullopt;
  return (weighted_.cwiseAbs() * Vector::Ones(dim())).norm();
}

GridFunction hammerstein_apply(const HammersteinOperator& op, const GridFunction& y) {
  return op.apply_grid(y);
}

// ---------------------------------------------------------------------------

Graph::Graph(Index n, const std::vector<Edge>& edges, bool include_self)
    : n_(n), include_self_(include_self) {
  if (n < 0) throw std::invalid_argument("graph: negative node count");
  std::vector<std::set<Index>> sets(static_cast<std::size_t>(n));
  for (const auto& [u, v] : edges) {
    if (u < 0 || v < 0 || u >= n || v >= n)
      throw std::invalid_argument("graph: edge (" + std::to_string(u) + ", " + std::to_string(v) +
                                  ") out of range");
    if (u == v) throw std::invalid_argument("graph: self loop at node " + std::to_string(u));
    sets[static_cast<std::size_t>(u)].insert(v);
    sets[static_cast<std::size_t>(v)].insert(u);
  }
  adj_.resize(sets.size());
  hood_.resize(sets.size());
  for (std::size_t v = 0; v < sets.size(); ++v) {
    adj_[v].assign(sets[v].begin(), sets[v].end());
    hood_[v] = adj_[v];
    if (include_self_) {
      hood_[v].insert(std::lower_bound(hood_[v].begin(), hood_[v].end(), static_cast<Index>(v)),
                      static_cast<Index>(v));
    }
  }
}

std::vector<Graph::Edge> Graph::edges() const {
  std::vector<Edge> out;
  for (Index u = 0; u < n_; ++u)
    for (Index v : adjacent(u))
      if (u < v) out.emplace_back(u, v);
  return out;
}

std::size_t Graph::edge_count() const {
  std::size_t twice = 0;
  for (const auto& a : adj_) twice += a.size();
  return twice / 2;
}

Graph read_edge_list(std::istream& in, std::optional<Index> n, bool include_self) {
  std::vector<Graph::Edge> edges;
  Index max_index = -1;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    long long u = 0, v = 0;
    std::string extra;
    if (!(ls >> u >> v) || (ls >> extra))
      throw std::invalid_argument("edge list: line " + std::to_string(lineno) +
                                  " is not a 'u v' pair");
    edges.emplace_back(static_cast<Index>(u), static_cast<Index>(v));
    max_index = std::max({max_index, static_cast<Index>(u), static_cast<Index>(v)});
  }
  return Graph(n.value_or(max_index + 1), edges, include_self);
}

Graph read_edge_list_file(const std::string& path, std::optional<Index> n, bool include_self) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("edge list: cannot open '" + path + "'");
  return read_edge_list(in, n, include_self);
}

// ---------------------------------------------------------------------------

GnnAggregateOperator::GnnAggregateOperator(Graph graph, Matrix W)
    : graph_(std::move(graph)), W_(std::move(W)) {
  if (W_.rows() != W_.cols() || W_.rows() < 1)
    throw std::invalid_argument("gnn: W must be a non-empty square matrix");
  if (!W_.allFinite()) throw std::invalid_argument("gnn: non-finite weight");
}

Vector GnnAggregateOperator::evaluate(const Vector& x) const {
  const Index d = feature_dim();
  const Index n = graph_.size();
  Matrix activated(d, n);
  for (Index i = 0; i < n; ++i)
    activated.col(i) = (W_ * x.segment(i * d, d)).cwiseMax(0.0);

  Vector out = Vector::Zero(n * d);
  for (Index v = 0; v < n; ++v) {
    const auto& hood = graph_.neighborhood(v);
    if (hood.empty()) continue;
    auto block = out.segment(v * d, d);
    block = activated.col(hood.front());
    for (std::size_t k = 1; k < hood.size(); ++k) block = block.cwiseMax(activated.col(hood[k]));
  }
  return out;
}

DirectSumVector GnnAggregateOperator::aggregate(const DirectSumVector& f) const {
  if (f.num_blocks() != graph_.size())
    throw std::invalid_argument("gnn: expected " + std::to_string(graph_.size()) + " blocks, got " +
                                std::to_string(f.num_blocks()));
  for (Index d : f.block_dims())
    if (d != feature_dim()) throw std::invalid_argument("gnn: block dimension mismatch");
  return DirectSumVector(apply(f.flat()), f.block_dims());
}

std::optional<Matrix> GnnAggregateOperator::jacobian(const Vector& x) const {
  const Index d = feature_dim();
  const Index n = graph_.size();
  Matrix pre(d, n);
  for (Index i = 0; i < n; ++i) pre.col(i) = W_ * x.segment(i * d, d);

  // Piecewise linear: each output entry follows the first maximizing input,
  // or is constant zero when that maximum is clipped by ReLU.
  Matrix J = Matrix::Zero(n * d, n * d);
  for (Index v = 0; v < n; ++v) {
    const auto& hood = graph_.neighborhood(v);
    for (Index c = 0; c < d; ++c) {
      Index best = -1;
      double best_value = 0.0;
      for (Index i : hood) {
        if (pre(c, i) > best_value) {
          best = i;
          best_value = pre(c, i);
        }
      }
      if (best >= 0) J.block(v * d + c, best * d, 1, d) = W_.row(c);
    }
  }
  return J;
}

std::optional<double> GnnAggregateOperator::lipschitz_bound() const {
  return gnn_lipschitz_report(*this).product;
}

DirectSumVector gnn_aggregate(const GnnAggregateOperator& op, const DirectSumVector& f) {
  return op.aggregate(f);
}

// ---------------------------------------------------------------------------

ShiftedOperator::ShiftedOperator(OperatorPtr base, double lambda, Vector f)
    : base_(std::move(base)), lambda_(lambda), f_(std::move(f)) {
  if (!base_) throw std::invalid_argument("shift: missing base operator");
  if (lambda_ == 0.0 || !std::isfinite(lambda_))
    throw std::invalid_argument("shift: lambda must be finite and nonzero");
  if (f_.size() != base_->dim()) throw std::invalid_argument("shift: f has the wrong length");
  if (!f_.allFinite()) throw std::invalid_argument("shift: non-finite f");
}

Vector ShiftedOperator::evaluate(const Vector& x) const { return lambda_ * base_->apply(x) + f_; }

std::optional<Matrix> ShiftedOperator::jacobian(const Vector& x) const {
  auto J = base_->jacobian(x);
  if (!J) return std::nullopt;
  return Matrix(lambda_ * *J);
}

std::optional<double> ShiftedOperator::lipschitz_bound() const {
  auto k = base_->lipschitz_bound();
  if (!k) return std::nullopt;
  return std::abs(lambda_) * *k;
}

ShiftedOperator lambda_shift(OperatorPtr base, double lambda, Vector f) {
  return ShiftedOperator(std::move(base), lambda, std::move(f));
}

FunctionOperator::FunctionOperator(Index dim, Fn fn, std::string name,
                                   std::optional<double> lipschitz, std::optional<double> bound)
    : dim_(dim), fn_(std::move(fn)), name_(std::move(name)), lipschitz_(lipschitz), bound_(bound) {
  if (!fn_) throw std::invalid_argument("function operator: empty callable");
}

}  // namespace fixpoint
