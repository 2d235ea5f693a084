#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace fixpoint {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

enum class QuadratureRule { Trapezoid, Simpson };

std::string to_string(QuadratureRule rule);
QuadratureRule parse_quadrature_rule(std::string_view name);

/// Equispaced abscissae on [a, b] with matching quadrature weights.
///
/// Trapezoid weights are h/2 at the endpoints and h in the interior. Simpson
/// weights follow the 1-4-2-...-4-1 pattern and need an odd point count.
class Grid {
 public:
  static Grid uniform(double a, double b, Index n,
                      QuadratureRule rule = QuadratureRule::Trapezoid);

  double a() const { return points_(0); }
  double b() const { return points_(points_.size() - 1); }
  Index size() const { return points_.size(); }
  QuadratureRule rule() const { return rule_; }
  const Vector& points() const { return points_; }
  const Vector& weights() const { return weights_; }

  /// Quadrature sum of `values` sampled on this grid.
  double integrate(const Vector& values) const;

  bool operator==(const Grid& other) const;

 private:
  Grid(Vector points, Vector weights, QuadratureRule rule);

  Vector points_;
  Vector weights_;
  QuadratureRule rule_;
};

Grid grid_uniform(double a, double b, Index n,
                  QuadratureRule rule = QuadratureRule::Trapezoid);

/// A function on [a, b] represented by its values at the grid points.
class GridFunction {
 public:
  GridFunction(Grid grid, Vector values);

  template <typename Fn>
  static GridFunction sample(const Grid& grid, Fn&& fn) {
    Vector values(grid.size());
    for (Index i = 0; i < grid.size(); ++i) values(i) = fn(grid.points()(i));
    return GridFunction(grid, std::move(values));
  }

  const Grid& grid() const { return grid_; }
  const Vector& values() const { return values_; }

 private:
  Grid grid_;
  Vector values_;
};

/// Element of a direct sum X = X_0 (+) ... (+) X_{k-1} stored as one flat
/// vector with block offsets. Block i occupies [offset(i), offset(i+1)).
class DirectSumVector {
 public:
  DirectSumVector() = default;
  explicit DirectSumVector(const std::vector<Vector>& blocks);
  DirectSumVector(Vector flat, std::vector<Index> block_dims);

  /// `count` blocks of equal dimension `dim`, all zero.
  static DirectSumVector zeros(Index count, Index dim);

  Index num_blocks() const { return static_cast<Index>(dims_.size()); }
  const std::vector<Index>& block_dims() const { return dims_; }
  Index offset(Index block) const { return offsets_[static_cast<std::size_t>(block)]; }

  auto block(Index i) const { return flat_.segment(offset(i), dims_[static_cast<std::size_t>(i)]); }
  auto block(Index i) { return flat_.segment(offset(i), dims_[static_cast<std::size_t>(i)]); }

  const Vector& flat() const { return flat_; }
  Vector& flat() { return flat_; }

  /// Concatenate the blocks of `a` followed by the blocks of `b`.
  static DirectSumVector concat(const DirectSumVector& a, const DirectSumVector& b);

 private:
  Vector flat_;
  std::vector<Index> dims_;
  std::vector<Index> offsets_{0};
};

enum class NormKind { L2, Sup, DirectSum };

std::string to_string(NormKind kind);
NormKind parse_norm_kind(std::string_view name);

/// Discrete L2 (sqrt of the sum of squares) or sup norm of a plain vector.
/// NormKind::DirectSum needs block structure and is rejected here.
double norm(const Vector& x, NormKind kind);
double norm(const GridFunction& x, NormKind kind);

/// Sum over blocks of the block L2 norm.
double direct_sum_norm(const DirectSumVector& x);

/// A norm on flat vectors. For DirectSum the block layout is carried along
/// so solvers can measure flat iterates of a direct-sum space.
class Norm {
 public:
  static Norm l2() { return Norm(NormKind::L2, {}); }
  static Norm sup() { return Norm(NormKind::Sup, {}); }
  static Norm direct_sum(std::vector<Index> block_dims);
  static Norm direct_sum(Index count, Index dim);

  NormKind kind() const { return kind_; }
  const std::vector<Index>& block_dims() const { return dims_; }

  double operator()(const Vector& x) const;

 private:
  Norm(NormKind kind, std::vector<Index> dims) : kind_(kind), dims_(std::move(dims)) {}

  NormKind kind_;
  std::vector<Index> dims_;
};

Vector lincomb(double a, const Vector& x, double b, const Vector& y);
GridFunction lincomb(double a, const GridFunction& x, double b, const GridFunction& y);
DirectSumVector lincomb(double a, const DirectSumVector& x, double b, const DirectSumVector& y);

bool all_finite(const Vector& x);

/// Parse whitespace- or comma-separated numbers, one matrix row per line.
/// Blank lines and lines starting with '#' are skipped.
Matrix read_matrix(std::istream& in);
Matrix read_matrix_file(const std::string& path);

}  // namespace fixpoint
