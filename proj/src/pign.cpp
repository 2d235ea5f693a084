#include "fixpoint/pign.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "fixpoint/calculus.hpp"
#include "fixpoint/random.hpp"
#include "fixpoint/report.hpp"

namespace fixpoint {

std::string to_string(PignMode mode) { return mode == PignMode::Homogeneous ? "homogeneous" : "anchored"; }

PignMode parse_pign_mode(std::string_view name) {
  if (name == "anchored") return PignMode::Anchored;
  if (name == "homogeneous") return PignMode::Homogeneous;
  throw std::invalid_argument("unknown pign mode '" + std::string(name) + "'");
}

PlantedPartitionDataset planted_partition(const PlantedPartitionParams& params) {
  const auto& [n, d, p_in, p_out, separation, seed] = params;
  if (n < 2 || n % 2 != 0) throw std::invalid_argument("planted partition: n must be even and at least 2");
  if (d < 1) throw std::invalid_argument("planted partition: d must be positive");
  if (!(p_out >= 0.0 && p_out < p_in && p_in <= 1.0))
    throw std::invalid_argument("planted partition: need 0 <= p_out < p_in <= 1");

  Rng rng(seed);
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (Index v = 0; v < n; ++v) labels[static_cast<std::size_t>(v)] = v < n / 2 ? 0 : 1;

  std::vector<Graph::Edge> edges;
  for (Index u = 0; u < n; ++u)
    for (Index v = u + 1; v < n; ++v) {
      const bool same = labels[static_cast<std::size_t>(u)] == labels[static_cast<std::size_t>(v)];
      if (rng.bernoulli(same ? p_in : p_out)) edges.emplace_back(u, v);
    }

  DirectSumVector X = DirectSumVector::zeros(n, d);
  for (Index v = 0; v < n; ++v) {
    auto block = X.block(v);
    for (Index c = 0; c < d; ++c) block(c) = rng.normal();
    block(0) += labels[static_cast<std::size_t>(v)] == 1 ? separation / 2.0 : -separation / 2.0;
  }
  return {Graph(n, edges, true), std::move(X), std::move(labels), params};
}

DirectSumVector add_dropin_noise(const DirectSumVector& X, double p, double magnitude, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("drop-in noise: p must lie in [0, 1]");
  const Index total = X.flat().size();
  const auto count = static_cast<Index>(std::floor(p * static_cast<double>(total)));

  // Partial Fisher-Yates: the first `count` slots end up a uniform sample.
  std::vector<Index> order(static_cast<std::size_t>(total));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(seed);
  for (Index i = 0; i < count; ++i) {
    const auto j = i + static_cast<Index>(rng.index(static_cast<std::uint64_t>(total - i)));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  DirectSumVector out = X;
  for (Index i = 0; i < count; ++i) out.flat()(order[static_cast<std::size_t>(i)]) += magnitude;
  return out;
}

PignEmbedding pign_embed(const GnnAggregateOperator& op, const DirectSumVector& X, double alpha,
                         int max_iter, double epsilon, PignMode mode) {
  if (X.num_blocks() != op.graph().size() || X.flat().size() != op.dim())
    throw std::invalid_argument("pign: features do not match the graph and operator dimensions");
  const GnnLipschitzReport report = gnn_lipschitz_report(op);
  if (!report.certified)
    std::cerr << "warning: pign operator is not contraction certified (L * alpha_max = "
              << report.product << ")\n";

  PicardConfig cfg;
  cfg.lambda = 1.0;
  cfg.smoothing = alpha;
  cfg.epsilon = epsilon;
  cfg.max_iter = max_iter;
  cfg.norm_kind = NormKind::DirectSum;
  SolveResult r = mode == PignMode::Anchored ? iterate(op, cfg, &X.flat(), X.flat())
                                             : iterate(op, cfg, nullptr, X.flat());
  return {DirectSumVector(std::move(r.solution), X.block_dims()), std::move(r.trace)};
}

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

}  // namespace

ReadoutResult train_logistic_readout(const DirectSumVector& embeddings, const std::vector<int>& labels,
                                     std::uint64_t split_seed, double lr, int epochs) {
  const Index n = embeddings.num_blocks();
  if (static_cast<std::size_t>(n) != labels.size()) throw std::invalid_argument("readout: label count mismatch");
  if (n < 5) throw std::invalid_argument("readout: need at least 5 nodes for an 80/20 split");
  if (!(lr > 0.0) || epochs < 1) throw std::invalid_argument("readout: need lr > 0 and epochs >= 1");
  const Index d = embeddings.block_dims().front();
  for (Index bd : embeddings.block_dims())
    if (bd != d) throw std::invalid_argument("readout: embeddings must share one block dimension");
  for (int y : labels)
    if (y != 0 && y != 1) throw std::invalid_argument("readout: labels must be 0 or 1");

  ReadoutResult out;
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(split_seed);
  for (Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Index>(rng.index(static_cast<std::uint64_t>(i + 1)));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  const auto n_train = static_cast<Index>(std::floor(0.8 * static_cast<double>(n)));
  out.train_nodes.assign(order.begin(), order.begin() + n_train);
  out.test_nodes.assign(order.begin() + n_train, order.end());

  auto design = [&](const std::vector<Index>& nodes) {
    Matrix Z(static_cast<Index>(nodes.size()), d);
    for (std::size_t r = 0; r < nodes.size(); ++r) Z.row(static_cast<Index>(r)) = embeddings.block(nodes[r]).transpose();
    return Z;
  };
  auto targets = [&](const std::vector<Index>& nodes) {
    Vector y(static_cast<Index>(nodes.size()));
    for (std::size_t r = 0; r < nodes.size(); ++r) y(static_cast<Index>(r)) = labels[static_cast<std::size_t>(nodes[r])];
    return y;
  };

  Matrix Ztrain = design(out.train_nodes);
  Matrix Ztest = design(out.test_nodes);
  const Vector ytrain = targets(out.train_nodes);
  const Vector ytest = targets(out.test_nodes);

  const Vector mean = Ztrain.colwise().mean().transpose();
  Vector scale = ((Ztrain.rowwise() - mean.transpose()).colwise().squaredNorm().transpose() /
                  static_cast<double>(n_train)).cwiseSqrt();
  for (Index c = 0; c < d; ++c)
    if (!(scale(c) > 1e-12)) scale(c) = 1.0;
  Ztrain = (Ztrain.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
  Ztest = (Ztest.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();

  Vector w = Vector::Zero(d);
  double b = 0.0;
  const double m = static_cast<double>(n_train);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const Vector logits = (Ztrain * w).array() + b;
    Vector residual(n_train);
    double loss = 0.0;
    for (Index r = 0; r < n_train; ++r) {
      residual(r) = sigmoid(logits(r)) - ytrain(r);
      loss += softplus(logits(r)) - ytrain(r) * logits(r);
    }
    if (!std::isfinite(loss))
      throw std::runtime_error("readout: non-finite loss at epoch " + std::to_string(epoch) +
                               " (lr " + std::to_string(lr) + ", |w| " + std::to_string(w.norm()) + ")");
    w -= lr * (Ztrain.transpose() * residual) / m;
    b -= lr * residual.sum() / m;
  }

  Index correct = 0;
  const Vector test_logits = (Ztest * w).array() + b;
  for (Index r = 0; r < test_logits.size(); ++r) {
    const int predicted = sigmoid(test_logits(r)) >= 0.5 ? 1 : 0;
    if (predicted == static_cast<int>(ytest(r))) ++correct;
  }
  out.weights = w;
  out.bias = b;
  out.accuracy = static_cast<double>(correct) / static_cast<double>(test_logits.size());
  return out;
}

void ExperimentConfig::validate() const {
  if (!(noise_p >= 0.0 && noise_p <= 1.0)) throw std::invalid_argument("noise.p must lie in [0, 1]");
  if (!(noise_magnitude > 0.0)) throw std::invalid_argument("noise.magnitude must be positive");
  if (operator_dim != 0 && operator_dim < dataset.d)
    throw std::invalid_argument("operator.dim must be at least the feature dimension");
  if (!(target_contraction > 0.0 && target_contraction < 1.0))
    throw std::invalid_argument("operator.target_contraction must lie in (0, 1)");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("picard.alpha must lie in [0, 1]");
  if (!(epsilon > 0.0)) throw std::invalid_argument("picard.epsilon must be positive");
  if (max_iter < 1) throw std::invalid_argument("picard.max_iter must be at least 1");
  if (!(lr > 0.0)) throw std::invalid_argument("readout.lr must be positive");
  if (epochs < 1) throw std::invalid_argument("readout.epochs must be at least 1");
}

DirectSumVector lift_features(const DirectSumVector& X, Index dim) {
  std::vector<Vector> blocks;
  blocks.reserve(static_cast<std::size_t>(X.num_blocks()));
  for (Index v = 0; v < X.num_blocks(); ++v) {
    if (X.block(v).size() > dim) throw std::invalid_argument("lift: block is wider than the target dimension");
    Vector b = Vector::Zero(dim);
    b.head(X.block(v).size()) = X.block(v);
    blocks.push_back(std::move(b));
  }
  return DirectSumVector(blocks);
}

PignResult run_pign_experiment(const ExperimentConfig& cfg, std::uint64_t run_seed) {
  cfg.validate();
  PlantedPartitionParams dp = cfg.dataset;
  dp.seed = cfg.dataset.seed + run_seed;
  const PlantedPartitionDataset data = planted_partition(dp);

  const DirectSumVector noisy = add_dropin_noise(data.features, cfg.noise_p, cfg.noise_magnitude,
                                                 cfg.noise_seed + run_seed);
  const Index dim = cfg.operator_dim == 0 ? dp.d : cfg.operator_dim;
  const DirectSumVector X = lift_features(noisy, dim);

  Rng rng(cfg.operator_seed + run_seed);
  const Matrix W0 = rng.normal_matrix(dim, dim);
  const Index alpha_max = gnn_lipschitz_report(GnnAggregateOperator(data.graph, W0)).alpha_max;
  const GnnAggregateOperator op(data.graph, rescale_to_contraction(W0, alpha_max, cfg.target_contraction));

  PignResult out;
  out.split_seed = cfg.split_seed + run_seed;
  out.pign = pign_embed(op, X, cfg.alpha, cfg.max_iter, cfg.epsilon, cfg.mode);

  // Baseline: one application of the update map without smoothing.
  Vector single = op.apply(X.flat());
  if (cfg.mode == PignMode::Anchored) single += X.flat();
  const DirectSumVector baseline(std::move(single), X.block_dims());

  out.readout_accuracy =
      train_logistic_readout(out.pign.embeddings, data.labels, out.split_seed, cfg.lr, cfg.epochs).accuracy;
  out.baseline_accuracy =
      train_logistic_readout(baseline, data.labels, out.split_seed, cfg.lr, cfg.epochs).accuracy;
  return out;
}

std::vector<ExperimentRow> run_pign_seeds(const ExperimentConfig& cfg, const std::vector<std::uint64_t>& seeds) {
  std::vector<ExperimentRow> rows;
  rows.reserve(seeds.size());
  for (std::uint64_t s : seeds) {
    const PignResult r = run_pign_experiment(cfg, s);
    rows.push_back({s, cfg.mode, cfg.noise_p, r.readout_accuracy, r.baseline_accuracy,
                    r.pign.trace.iterations_used});
  }
  return rows;
}

std::string experiment_csv(const std::vector<ExperimentRow>& rows) {
  std::ostringstream out;
  out << "seed,mode,noise_p,pign_acc,baseline_acc,iters_used\n";
  for (const auto& r : rows)
    out << r.seed << ',' << to_string(r.mode) << ',' << format_number(r.noise_p) << ','
        << format_number(r.pign_acc) << ',' << format_number(r.baseline_acc) << ',' << r.iters_used << '\n';
  return out.str();
}

}  // namespace fixpoint
