#include "fixpoint/function_space.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fixpoint {

std::string to_string(QuadratureRule rule) {
  return rule == QuadratureRule::Simpson ? "simpson" : "trapezoid";
}

QuadratureRule parse_quadrature_rule(std::string_view name) {
  if (name == "trapezoid") return QuadratureRule::Trapezoid;
  if (name == "simpson") return QuadratureRule::Simpson;
  throw std::invalid_argument("unknown quadrature rule '" + std::string(name) + "'");
}

Grid::Grid(Vector points, Vector weights, QuadratureRule rule)
    : points_(std::move(points)), weights_(std::move(weights)), rule_(rule) {}

Grid Grid::uniform(double a, double b, Index n, QuadratureRule rule) {
  if (!(std::isfinite(a) && std::isfinite(b)) || !(a < b))
    throw std::invalid_argument("grid: need finite a < b");
  if (n < 2) throw std::invalid_argument("grid: need at least 2 points");
  if (rule == QuadratureRule::Simpson && n % 2 == 0)
    throw std::invalid_argument("grid: simpson rule needs an odd number of points");

  const double h = (b - a) / static_cast<double>(n - 1);
  Vector points(n);
  for (Index i = 0; i < n; ++i) points(i) = a + h * static_cast<double>(i);
  points(n - 1) = b;

  Vector weights(n);
  if (rule == QuadratureRule::Trapezoid) {
    weights.setConstant(h);
    weights(0) = weights(n - 1) = h / 2.0;
  } else {
    for (Index i = 0; i < n; ++i) weights(i) = (i % 2 == 1 ? 4.0 : 2.0) * h / 3.0;
    weights(0) = weights(n - 1) = h / 3.0;
  }
  return Grid(std::move(points), std::move(weights), rule);
}

double Grid::integrate(const Vector& values) const {
  if (values.size() != size()) throw std::invalid_argument("grid: value count mismatch");
  return weights_.dot(values);
}

bool Grid::operator==(const Grid& other) const {
  return rule_ == other.rule_ && points_.size() == other.points_.size() &&
         points_ == other.points_ && weights_ == other.weights_;
}

Grid grid_uniform(double a, double b, Index n, QuadratureRule rule) {
  return Grid::uniform(a, b, n, rule);
}

GridFunction::GridFunction(Grid grid, Vector values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (values_.size() != grid_.size())
    throw std::invalid_argument("grid function: value count does not match grid");
  if (!all_finite(values_)) throw std::invalid_argument("grid function: non-finite value");
}

DirectSumVector::DirectSumVector(const std::vector<Vector>& blocks) {
  Index total = 0;
  for (const auto& b : blocks) {
    dims_.push_back(b.size());
    total += b.size();
    offsets_.push_back(total);
  }
  flat_.resize(total);
  for (std::size_t i = 0; i < blocks.size(); ++i)
    flat_.segment(offsets_[i], dims_[i]) = blocks[i];
}

DirectSumVector::DirectSumVector(Vector flat, std::vector<Index> block_dims)
    : flat_(std::move(flat)), dims_(std::move(block_dims)) {
  Index total = 0;
  for (Index d : dims_) {
    if (d < 0) throw std::invalid_argument("direct sum: negative block dimension");
    total += d;
    offsets_.push_back(total);
  }
  if (total != flat_.size())
    throw std::invalid_argument("direct sum: block dims do not add up to vector length");
}

DirectSumVector DirectSumVector::zeros(Index count, Index dim) {
  return DirectSumVector(Vector::Zero(count * dim),
                         std::vector<Index>(static_cast<std::size_t>(count), dim));
}

DirectSumVector DirectSumVector::concat(const DirectSumVector& a, const DirectSumVector& b) {
  Vector flat(a.flat_.size() + b.flat_.size());
  flat << a.flat_, b.flat_;
  std::vector<Index> dims = a.dims_;
  dims.insert(dims.end(), b.dims_.begin(), b.dims_.end());
  return DirectSumVector(std::move(flat), std::move(dims));
}

std::string to_string(NormKind kind) {
  switch (kind) {
    case NormKind::L2: return "l2";
    case NormKind::Sup: return "sup";
    case NormKind::DirectSum: return "direct-sum";
  }
  return "l2";
}

NormKind parse_norm_kind(std::string_view name) {
  if (name == "l2" || name == "discrete-l2") return NormKind::L2;
  if (name == "sup") return NormKind::Sup;
  if (name == "direct-sum") return NormKind::DirectSum;
  throw std::invalid_argument("unknown norm '" + std::string(name) + "'");
}

double norm(const Vector& x, NormKind kind) {
  switch (kind) {
    case NormKind::L2: return x.norm();
    case NormKind::Sup: return x.size() == 0 ? 0.0 : x.cwiseAbs().maxCoeff();
    case NormKind::DirectSum: break;
  }
  throw std::invalid_argument("norm: direct-sum norm needs block structure");
}

double norm(const GridFunction& x, NormKind kind) { return norm(x.values(), kind); }

double direct_sum_norm(const DirectSumVector& x) {
  double total = 0.0;
  for (Index i = 0; i < x.num_blocks(); ++i) total += x.block(i).norm();
  return total;
}

Norm Norm::direct_sum(std::vector<Index> block_dims) {
  return Norm(NormKind::DirectSum, std::move(block_dims));
}

Norm Norm::direct_sum(Index count, Index dim) {
  return direct_sum(std::vector<Index>(static_cast<std::size_t>(count), dim));
}

double Norm::operator()(const Vector& x) const {
  if (kind_ != NormKind::DirectSum) return norm(x, kind_);
  double total = 0.0;
  Index offset = 0;
  for (Index d : dims_) {
    if (offset + d > x.size()) throw std::invalid_argument("norm: vector shorter than block layout");
    total += x.segment(offset, d).norm();
    offset += d;
  }
  if (offset != x.size()) throw std::invalid_argument("norm: vector longer than block layout");
  return total;
}

Vector lincomb(double a, const Vector& x, double b, const Vector& y) {
  if (x.size() != y.size()) throw std::invalid_argument("lincomb: shape mismatch");
  return a * x + b * y;
}

GridFunction lincomb(double a, const GridFunction& x, double b, const GridFunction& y) {
  if (!(x.grid() == y.grid())) throw std::invalid_argument("lincomb: grid mismatch");
  return GridFunction(x.grid(), lincomb(a, x.values(), b, y.values()));
}

DirectSumVector lincomb(double a, const DirectSumVector& x, double b, const DirectSumVector& y) {
  if (x.block_dims() != y.block_dims()) throw std::invalid_argument("lincomb: block layout mismatch");
  return DirectSumVector(lincomb(a, x.flat(), b, y.flat()), x.block_dims());
}

bool all_finite(const Vector& x) { return x.allFinite(); }

Matrix read_matrix(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    for (char& c : line)
      if (c == ',' || c == ';' || c == '\t' || c == '\r') c = ' ';
    std::istringstream ls(line);
    std::string tok;
    std::vector<double> row;
    while (ls >> tok) {
      if (row.empty() && tok.front() == '#') break;
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(tok, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tok.size()) throw std::invalid_argument("matrix: bad number '" + tok + "'");
      row.push_back(v);
    }
    if (!row.empty()) rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::invalid_argument("matrix: no rows");
  const std::size_t cols = rows.front().size();
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) throw std::invalid_argument("matrix: ragged rows");
    for (std::size_t j = 0; j < cols; ++j)
      m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  }
  return m;
}

Matrix read_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("matrix: cannot open '" + path + "'");
  return read_matrix(in);
}

}  // namespace fixpoint
