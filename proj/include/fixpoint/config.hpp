#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "fixpoint/operators.hpp"
#include "fixpoint/picard.hpp"
#include "fixpoint/pign.hpp"

namespace fixpoint {

using nlohmann::json;

/// A config value is missing or invalid; `field` names it as a dotted path.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Where relative file references resolve and which seed fills in random
/// generators that do not name their own.
struct ConfigContext {
  std::filesystem::path base_dir = ".";
  std::uint64_t seed = 0;
};

json load_json_file(const std::filesystem::path& path);

/// Matrix value: nested arrays, a file path string, {"path": ...},
/// {"identity": d, "scale": c}, {"diag": [...]}, {"zero": d}, or
/// {"random": {"dim": d, "seed": s, "spectral_norm": k}}.
Matrix parse_matrix(const json& j, const std::string& field, const ConfigContext& ctx);

/// Vector value: an array, {"constant": c}, {"zero": true}, or
/// {"random": {"seed": s, "scale": c}}. `dim` fixes the length.
Vector parse_vector(const json& j, Index dim, const std::string& field, const ConfigContext& ctx);

/// {"a", "b", "n", "rule"}.
Grid parse_grid(const json& j, const std::string& field);
json grid_to_json(const Grid& grid);

/// {"type": "affine"|"attention"|"hammerstein"|"gnn", ...}.
OperatorPtr build_operator(const json& j, const std::string& field, const ConfigContext& ctx);

/// {"lambda", "epsilon", "max_iter", "smoothing", "norm", "stop"}.
PicardConfig parse_picard(const json& j, const std::string& field);
json picard_to_json(const PicardConfig& cfg);

struct SolveSetup {
  OperatorPtr op;
  Vector f;
  PicardConfig picard;
  std::optional<double> contraction;  // "picard.k" override for the rate bounds
};

/// Top level {"operator": {...}, "f": ..., "picard": {...}}.
SolveSetup parse_solve_setup(const json& root, const ConfigContext& ctx);

/// {dataset, noise, operator, picard, readout, mode, seeds?}.
ExperimentConfig parse_experiment(const json& root, const ConfigContext& ctx);
json experiment_to_json(const ExperimentConfig& cfg);

}  // namespace fixpoint
