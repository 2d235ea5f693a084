#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace fixpoint::cli {

inline constexpr const char* kToolVersion = "0.1.0";

/// Stable process exit codes.
enum ExitCode : int {
  kSuccess = 0,
  kConfigError = 1,
  kNotConverged = 2,
  kDiverged = 3,
};

struct RunOptions {
  std::filesystem::path config_path;
  std::filesystem::path out_dir = "out";
  std::uint64_t seed = 0;
  bool quiet = false;
};

/// trace.csv, summary.json {converged, iterations_used, final_residual}.
int cmd_solve(const RunOptions& opts);
/// rates.csv with a priori / a posteriori bounds against a reference solve.
int cmd_rates(const RunOptions& opts);
/// lipschitz.json {method, value, samples, seed, is_upper_bound}.
int cmd_lipschitz(const RunOptions& opts);
/// frechet.json: analytic vs central-difference derivative of attention.
int cmd_frechet_check(const RunOptions& opts);
/// certificate.json and the rescaled weight matrix W_rescaled.txt.
int cmd_gnn_cert(const RunOptions& opts);
/// pign.csv (one row per seed) and summary.json.
int cmd_pign(const RunOptions& opts);
/// sweep.csv aggregating runs of `solve` or `pign` over a list of values.
int cmd_sweep(const RunOptions& opts);

/// Dispatch by command name; unknown names are a config error.
int run_command(const std::string& command, const RunOptions& opts);

}  // namespace fixpoint::cli
