#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fixpoint/function_space.hpp"

namespace fixpoint {

/// Raised when an operator or an iteration produces non-finite values or
/// grows past the divergence guard.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A map T : R^dim -> R^dim acting on flat coordinates of some space X.
///
/// Structured spaces (token matrices, direct sums, grid functions) are
/// flattened; natural_norm() reports the norm the space carries.
class Operator {
 public:
  virtual ~Operator() = default;

  virtual Index dim() const = 0;
  virtual std::string name() const = 0;

  /// T(x). Rejects a wrong input length and reports non-finite output as
  /// DivergenceError.
  Vector apply(const Vector& x) const;

  /// Analytic Jacobian at x, when the operator provides one.
  virtual std::optional<Matrix> jacobian(const Vector& /*x*/) const { return std::nullopt; }

  /// Global Lipschitz constant in natural_norm(), when known in closed form.
  virtual std::optional<double> lipschitz_bound() const { return std::nullopt; }

  /// sup ||T(x)|| over all x, for bounded operators.
  virtual std::optional<double> output_bound() const { return std::nullopt; }

  virtual Norm natural_norm() const { return Norm::l2(); }

 protected:
  virtual Vector evaluate(const Vector& x) const = 0;
};

using OperatorPtr = std::shared_ptr<const Operator>;

Vector apply(const Operator& op, const Vector& x);

/// T(x) = A x + b.
class AffineOperator final : public Operator {
 public:
  AffineOperator(Matrix A, Vector b);

  static AffineOperator zero(Index d);
  static AffineOperator identity(Index d);

  const Matrix& matrix() const { return A_; }
  const Vector& offset() const { return b_; }

  Index dim() const override { return A_.rows(); }
  std::string name() const override { return "affine"; }
  std::optional<Matrix> jacobian(const Vector& x) const override;
  std::optional<double> lipschitz_bound() const override;
  std::optional<double> output_bound() const override;

 protected:
  Vector evaluate(const Vector& x) const override;

 private:
  Matrix A_;
  Vector b_;
};

/// Softmax-free single-head self-attention T(Y) = (Y Wq)(Y Wk)^T (Y Wv)
/// on m tokens of width d. Flat coordinates are the row-major entries of Y.
class AttentionOperator final : public Operator {
 public:
  AttentionOperator(Matrix Wq, Matrix Wk, Matrix Wv, Index tokens);

  Index width() const { return Wq_.rows(); }
  Index tokens() const { return tokens_; }
  const Matrix& queries() const { return Wq_; }
  const Matrix& keys() const { return Wk_; }
  const Matrix& values() const { return Wv_; }

  Matrix attend(const Matrix& Y) const;

  /// Sum of the three terms linear in H of T(Y + H).
  Matrix frechet(const Matrix& Y, const Matrix& H) const;

  Matrix unflatten(const Vector& x) const;
  static Vector flatten(const Matrix& Y);

  Index dim() const override { return tokens_ * width(); }
  std::string name() const override { return "attention"; }
  std::optional<Matrix> jacobian(const Vector& x) const override;

 protected:
  Vector evaluate(const Vector& x) const override;

 private:
  void check_tokens(const Matrix& Y) const;

  Matrix Wq_, Wk_, Wv_;
  Index tokens_;
};

Matrix attention_apply(const AttentionOperator& op, const Matrix& Y);

enum class Nonlinearity { Linear, Tanh };

std::string to_string(Nonlinearity phi);
Nonlinearity parse_nonlinearity(std::string_view name);

/// Integrand G(y, t, s) = K(t, s) * phi(y) of a Hammerstein operator.
class HammersteinKernel {
 public:
  using KernelFn = std::function<double(double, double)>;

  HammersteinKernel(std::string name, KernelFn kernel, Nonlinearity phi, Vector params = {});
  /// Kernel given directly as K(t_i, s_j) on the operator's grid.
  static HammersteinKernel table(Matrix values, Nonlinearity phi);

  /// Registered families:
  ///   zero            K = 0
  ///   product  [c]    K = c t s
  ///   constant [c]    K = c
  ///   exponential [c, ell]  K = c exp(-|t - s| / ell)
  static HammersteinKernel from_registry(const std::string& name, const Vector& params,
                                         Nonlinearity phi = Nonlinearity::Linear);

  const std::string& name() const { return name_; }
  const Vector& params() const { return params_; }
  Nonlinearity nonlinearity() const { return phi_; }

  double evaluate(double y, double t, double s) const;
  /// K(t_i, s_j) on `grid`.
  Matrix sample(const Grid& grid) const;

 private:
  std::string name_;
  KernelFn kernel_;
  std::optional<Matrix> table_;
  Nonlinearity phi_;
  Vector params_;
};

/// (T y)(t_i) = sum_j w_j G(y(s_j), t_i, s_j) on a fixed grid.
class HammersteinOperator final : public Operator {
 public:
  HammersteinOperator(Grid grid, HammersteinKernel kernel);

  const Grid& grid() const { return grid_; }
  const HammersteinKernel& kernel() const { return kernel_; }
  /// K(t_i, s_j) w_j.
  const Matrix& weighted_kernel() const { return weighted_; }

  GridFunction apply_grid(const GridFunction& y) const;

  Index dim() const override { return grid_.size(); }
  std::string name() const override { return "hammerstein"; }
  std::optional<Matrix> jacobian(const Vector& x) const override;
  std::optional<double> lipschitz_bound() const override;
  std::optional<double> output_bound() const override;

 protected:
  Vector evaluate(const Vector& x) const override;

 private:
  Grid grid_;
  HammersteinKernel kernel_;
  Matrix weighted_;
};

GridFunction hammerstein_apply(const HammersteinOperator& op, const GridFunction& y);

/// Undirected simple graph with sorted adjacency lists. When include_self is
/// set every node belongs to its own neighbourhood N(v).
class Graph {
 public:
  using Edge = std::pair<Index, Index>;

  Graph(Index n, const std::vector<Edge>& edges, bool include_self = true);

  Index size() const { return n_; }
  bool include_self() const { return include_self_; }
  /// Adjacent nodes, not counting v itself.
  const std::vector<Index>& adjacent(Index v) const { return adj_[static_cast<std::size_t>(v)]; }
  /// N(v): adjacent nodes plus v when include_self, sorted.
  const std::vector<Index>& neighborhood(Index v) const { return hood_[static_cast<std::size_t>(v)]; }
  std::vector<Edge> edges() const;
  std::size_t edge_count() const;

 private:
  Index n_;
  bool include_self_;
  std::vector<std::vector<Index>> adj_;
  std::vector<std::vector<Index>> hood_;
};

/// Edge list text, one "u v" pair per line, 0-indexed. The node count is
/// `n` when given, otherwise one past the largest index seen.
Graph read_edge_list(std::istream& in, std::optional<Index> n, bool include_self);
Graph read_edge_list_file(const std::string& path, std::optional<Index> n, bool include_self);

/// Max-pool aggregation on the direct sum of node feature spaces:
/// block v of T(f) is max over i in N(v) of ReLU(W f_i), zero if N(v) is empty.
class GnnAggregateOperator final : public Operator {
 public:
  GnnAggregateOperator(Graph graph, Matrix W);

  const Graph& graph() const { return graph_; }
  const Matrix& weight() const { return W_; }
  Index feature_dim() const { return W_.rows(); }

  DirectSumVector aggregate(const DirectSumVector& f) const;

  Index dim() const override { return graph_.size() * feature_dim(); }
  std::string name() const override { return "gnn"; }
  std::optional<Matrix> jacobian(const Vector& x) const override;
  std::optional<double> lipschitz_bound() const override;
  Norm natural_norm() const override { return Norm::direct_sum(graph_.size(), feature_dim()); }

 protected:
  Vector evaluate(const Vector& x) const override;

 private:
  Graph graph_;
  Matrix W_;
};

DirectSumVector gnn_aggregate(const GnnAggregateOperator& op, const DirectSumVector& f);

/// P(x) = lambda T(x) + f.
class ShiftedOperator final : public Operator {
 public:
  ShiftedOperator(OperatorPtr base, double lambda, Vector f);

  const Operator& base() const { return *base_; }
  double lambda() const { return lambda_; }
  const Vector& shift() const { return f_; }

  Index dim() const override { return base_->dim(); }
  std::string name() const override { return "shifted(" + base_->name() + ")"; }
  std::optional<Matrix> jacobian(const Vector& x) const override;
  std::optional<double> lipschitz_bound() const override;
  Norm natural_norm() const override { return base_->natural_norm(); }

 protected:
  Vector evaluate(const Vector& x) const override;

 private:
  OperatorPtr base_;
  double lambda_;
  Vector f_;
};

ShiftedOperator lambda_shift(OperatorPtr base, double lambda, Vector f);

/// Wraps an arbitrary callable; used for ad-hoc maps in experiments and tests.
class FunctionOperator final : public Operator {
 public:
  using Fn = std::function<Vector(const Vector&)>;

  FunctionOperator(Index dim, Fn fn, std::string name = "function",
                   std::optional<double> lipschitz = std::nullopt,
                   std::optional<double> bound = std::nullopt);

  Index dim() const override { return dim_; }
  std::string name() const override { return name_; }
  std::optional<double> lipschitz_bound() const override { return lipschitz_; }
  std::optional<double> output_bound() const override { return bound_; }

 protected:
  Vector evaluate(const Vector& x) const override { return fn_(x); }

 private:
  Index dim_;
  Fn fn_;
  std::string name_;
  std::optional<double> lipschitz_;
  std::optional<double> bound_;
};

}  // namespace fixpoint
