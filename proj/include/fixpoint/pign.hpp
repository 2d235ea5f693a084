#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fixpoint/function_space.hpp"
#include "fixpoint/operators.hpp"
#include "fixpoint/picard.hpp"

namespace fixpoint {

struct PlantedPartitionParams {
  Index n = 200;
  Index d = 8;
  double p_in = 0.1;
  double p_out = 0.01;
  double separation = 2.0;
  std::uint64_t seed = 7;
};

/// Two balanced classes (nodes [0, n/2) are class 0, the rest class 1).
/// Edges are independent Bernoulli(p_in) within a class and Bernoulli(p_out)
/// across. Features are unit Gaussian noise with the first coordinate
/// shifted by -separation/2 (class 0) or +separation/2 (class 1).
struct PlantedPartitionDataset {
  Graph graph;
  DirectSumVector features;
  std::vector<int> labels;
  PlantedPartitionParams params;
};

PlantedPartitionDataset planted_partition(const PlantedPartitionParams& params);

/// Adds +magnitude to floor(p * N) entries chosen uniformly without
/// replacement; all other entries are untouched.
DirectSumVector add_dropin_noise(const DirectSumVector& X, double p, double magnitude,
                                 std::uint64_t seed);

/// Homogeneous: x_{k+1} = alpha x_k + (1 - alpha) T(x_k).
/// Anchored:    x_{k+1} = alpha x_k + (1 - alpha) (T(x_k) + X).
enum class PignMode { Anchored, Homogeneous };

std::string to_string(PignMode mode);
PignMode parse_pign_mode(std::string_view name);

struct PignEmbedding {
  DirectSumVector embeddings;
  IterationTrace trace;
};

/// Smoothed message passing started at x_0 = X, stopped when the direct-sum
/// step norm drops to epsilon or after max_iter updates. Runs on the shared
/// Picard engine. Warns on stderr when the operator is not contraction
/// certified.
PignEmbedding pign_embed(const GnnAggregateOperator& op, const DirectSumVector& X, double alpha,
                         int max_iter, double epsilon, PignMode mode = PignMode::Anchored);

struct ReadoutResult {
  Vector weights;  // on standardized features
  double bias = 0.0;
  double accuracy = 0.0;
  std::vector<Index> train_nodes;
  std::vector<Index> test_nodes;
};

/// Binary logistic regression on node embeddings, trained by full-batch
/// gradient descent on the mean log-loss. The nodes are split 80/20 by
/// split_seed, features are standardized with training statistics, and the
/// accuracy is measured on the held-out nodes.
ReadoutResult train_logistic_readout(const DirectSumVector& embeddings, const std::vector<int>& labels,
                                     std::uint64_t split_seed, double lr, int epochs);

struct ExperimentConfig {
  PlantedPartitionParams dataset;
  double noise_p = 0.0;
  double noise_magnitude = 3.0;
  std::uint64_t noise_seed = 11;
  Index operator_dim = 0;  // 0: same as the feature dimension
  double target_contraction = 0.9;
  std::uint64_t operator_seed = 13;
  double alpha = 0.5;
  double epsilon = 1e-6;
  int max_iter = 10;
  double lr = 0.1;
  int epochs = 500;
  std::uint64_t split_seed = 17;
  PignMode mode = PignMode::Anchored;

  void validate() const;
};

struct PignResult {
  PignEmbedding pign;
  double readout_accuracy = 0.0;
  double baseline_accuracy = 0.0;
  std::uint64_t split_seed = 0;
};

/// Pad every block of X with zeros up to `dim` coordinates.
DirectSumVector lift_features(const DirectSumVector& X, Index dim);

/// Single run: dataset -> noise -> contractive GNN -> PIGN embedding ->
/// readout, plus the single-pass baseline (one application of the update
/// map without smoothing). Every seed in the config is offset by `run_seed`.
PignResult run_pign_experiment(const ExperimentConfig& cfg, std::uint64_t run_seed);

struct ExperimentRow {
  std::uint64_t seed = 0;
  PignMode mode = PignMode::Anchored;
  double noise_p = 0.0;
  double pign_acc = 0.0;
  double baseline_acc = 0.0;
  int iters_used = 0;
};

std::vector<ExperimentRow> run_pign_seeds(const ExperimentConfig& cfg,
                                          const std::vector<std::uint64_t>& seeds);

/// `seed,mode,noise_p,pign_acc,baseline_acc,iters_used`
std::string experiment_csv(const std::vector<ExperimentRow>& rows);

}  // namespace fixpoint
