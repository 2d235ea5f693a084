#include "fixpoint/config.hpp"

#include <fstream>

#include "fixpoint/calculus.hpp"
#include "fixpoint/random.hpp"

namespace fixpoint {

namespace {

std::string join(const std::string& field, const std::string& key) {
  return field.empty() ? key : field + "." + key;
}

const json& require(const json& j, const std::string& key, const std::string& field) {
  if (!j.is_object()) throw ConfigError(field, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError(join(field, key), "missing");
  return *it;
}

template <typename T>
T value_as(const json& j, const std::string& field) {
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(field, std::string("wrong type (") + e.what() + ")");
  }
}

template <typename T>
T get_or(const json& j, const std::string& key, const std::string& field, T fallback) {
  if (!j.is_object()) throw ConfigError(field, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  return value_as<T>(*it, join(field, key));
}

std::filesystem::path resolve_path(const std::string& p, const ConfigContext& ctx) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : ctx.base_dir / path;
}

std::uint64_t seed_or(const json& j, const std::string& field, const ConfigContext& ctx) {
  return get_or<std::uint64_t>(j, "seed", field, ctx.seed);
}

}  // namespace

json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("invalid JSON: ") + e.what());
  }
}

Matrix parse_matrix(const json& j, const std::string& field, const ConfigContext& ctx) {
  try {
    if (j.is_string()) return read_matrix_file(resolve_path(j.get<std::string>(), ctx).string());
    if (j.is_array()) {
      if (j.empty()) throw ConfigError(field, "empty matrix");
      const auto rows = static_cast<Index>(j.size());
      const auto cols = static_cast<Index>(value_as<std::vector<double>>(j.front(), field).size());
      Matrix m(rows, cols);
      for (Index r = 0; r < rows; ++r) {
        const auto row = value_as<std::vector<double>>(j[static_cast<std::size_t>(r)], field);
        if (static_cast<Index>(row.size()) != cols) throw ConfigError(field, "ragged rows");
        for (Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)];
      }
      return m;
    }
    if (j.is_object()) {
      if (j.contains("path"))
        return read_matrix_file(resolve_path(value_as<std::string>(j["path"], join(field, "path")), ctx).string());
      if (j.contains("identity")) {
        const auto d = value_as<Index>(j["identity"], join(field, "identity"));
        return get_or<double>(j, "scale", field, 1.0) * Matrix::Identity(d, d);
      }
      if (j.contains("zero")) {
        const auto d = value_as<Index>(j["zero"], join(field, "zero"));
        return Matrix::Zero(d, d);
      }
      if (j.contains("diag")) {
        const auto v = value_as<std::vector<double>>(j["diag"], join(field, "diag"));
        return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size())).asDiagonal();
      }
      if (j.contains("random")) {
        const json& r = j["random"];
        const std::string rf = join(field, "random");
        const auto d = value_as<Index>(require(r, "dim", rf), join(rf, "dim"));
        if (d < 1) throw ConfigError(join(rf, "dim"), "must be positive");
        Rng rng(seed_or(r, rf, ctx));
        Matrix m = rng.normal_matrix(d, d) / std::sqrt(static_cast<double>(d));
        if (r.contains("spectral_norm")) {
          const double k = value_as<double>(r["spectral_norm"], join(rf, "spectral_norm"));
          m *= k / spectral_norm(m);
        } else {
          m *= get_or<double>(r, "scale", rf, 1.0);
        }
        return m;
      }
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(field, e.what());
  }
  throw ConfigError(field, "unrecognised matrix value");
}

Vector parse_vector(const json& j, Index dim, const std::string& field, const ConfigContext& ctx) {
  Vector v;
  if (j.is_array()) {
    const auto vals = value_as<std::vector<double>>(j, field);
    v = Eigen::Map<const Vector>(vals.data(), static_cast<Index>(vals.size()));
  } else if (j.is_number()) {
    v = Vector::Constant(dim, j.get<double>());
  } else if (j.is_object() && j.contains("constant")) {
    v = Vector::Constant(dim, value_as<double>(j["constant"], join(field, "constant")));
  } else if (j.is_object() && j.contains("zero")) {
    v = Vector::Zero(dim);
  } else if (j.is_object() && j.contains("random")) {
    const json& r = j["random"];
    const std::string rf = join(field, "random");
    Rng rng(seed_or(r, rf, ctx));
    v = get_or<double>(r, "scale", rf, 1.0) * rng.normal_vector(dim);
  } else {
    throw ConfigError(field, "unrecognised vector value");
  }
  if (v.size() != dim)
    throw ConfigError(field, "expected " + std::to_string(dim) + " entries, got " + std::to_string(v.size()));
  if (!v.allFinite()) throw ConfigError(field, "non-finite entry");
  return v;
}

Grid parse_grid(const json& j, const std::string& field) {
  const double a = get_or<double>(j, "a", field, 0.0);
  const double b = get_or<double>(j, "b", field, 1.0);
  const auto n = value_as<Index>(require(j, "n", field), join(field, "n"));
  const auto rule = get_or<std::string>(j, "rule", field, "trapezoid");
  try {
    return Grid::uniform(a, b, n, parse_quadrature_rule(rule));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(field, e.what());
  }
}

json grid_to_json(const Grid& grid) {
  return {{"a", grid.a()}, {"b", grid.b()}, {"n", grid.size()}, {"rule", to_string(grid.rule())}};
}

namespace {

Graph parse_graph(const json& j, bool include_self, const std::string& field, const ConfigContext& ctx) {
  try {
    std::optional<Index> n;
    if (j.contains("n")) n = value_as<Index>(j["n"], join(field, "n"));
    if (j.contains("edges_path"))
      return read_edge_list_file(resolve_path(value_as<std::string>(j["edges_path"], join(field, "edges_path")), ctx).string(),
                                 n, include_self);
    if (j.contains("edges")) {
      std::vector<Graph::Edge> edges;
      for (const auto& e : j["edges"]) {
        const auto pair = value_as<std::vector<Index>>(e, join(field, "edges"));
        if (pair.size() != 2) throw ConfigError(join(field, "edges"), "each edge needs two endpoints");
        edges.emplace_back(pair[0], pair[1]);
      }
      if (!n) throw ConfigError(join(field, "n"), "missing (required with inline edges)");
      return Graph(*n, edges, include_self);
    }
    if (j.contains("planted_partition")) {
      const json& p = j["planted_partition"];
      const std::string pf = join(field, "planted_partition");
      PlantedPartitionParams params;
      params.n = get_or<Index>(p, "n", pf, params.n);
      params.d = 1;
      params.p_in = get_or<double>(p, "p_in", pf, params.p_in);
      params.p_out = get_or<double>(p, "p_out", pf, params.p_out);
      params.seed = seed_or(p, pf, ctx);
      const Graph g = planted_partition(params).graph;
      return Graph(g.size(), g.edges(), include_self);
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(field, e.what());
  }
  throw ConfigError(field, "needs 'edges', 'edges_path' or 'planted_partition'");
}

}  // namespace

OperatorPtr build_operator(const json& j, const std::string& field, const ConfigContext& ctx) {
  const auto type = value_as<std::string>(require(j, "type", field), join(field, "type"));
  try {
    if (type == "affine") {
      Matrix A = parse_matrix(require(j, "A", field), join(field, "A"), ctx);
      Vector b = j.contains("b") ? parse_vector(j["b"], A.rows(), join(field, "b"), ctx) : Vector::Zero(A.rows());
      return std::make_shared<AffineOperator>(std::move(A), std::move(b));
    }
    if (type == "attention") {
      return std::make_shared<AttentionOperator>(parse_matrix(require(j, "Wq", field), join(field, "Wq"), ctx),
                                                 parse_matrix(require(j, "Wk", field), join(field, "Wk"), ctx),
                                                 parse_matrix(require(j, "Wv", field), join(field, "Wv"), ctx),
                                                 get_or<Index>(j, "tokens", field, 1));
    }
    if (type == "hammerstein") {
      Grid grid = parse_grid(require(j, "grid", field), join(field, "grid"));
      const json& k = require(j, "kernel", field);
      const std::string kf = join(field, "kernel");
      const Nonlinearity phi = parse_nonlinearity(get_or<std::string>(k, "nonlinearity", kf, "linear"));
      if (k.contains("table")) {
        return std::make_shared<HammersteinOperator>(
            std::move(grid), HammersteinKernel::table(parse_matrix(k["table"], join(kf, "table"), ctx), phi));
      }
      const auto name = value_as<std::string>(require(k, "name", kf), join(kf, "name"));
      const auto params = get_or<std::vector<double>>(k, "params", kf, {});
      Vector p = Eigen::Map<const Vector>(params.data(), static_cast<Index>(params.size()));
      return std::make_shared<HammersteinOperator>(std::move(grid), HammersteinKernel::from_registry(name, p, phi));
    }
    if (type == "gnn") {
      const bool include_self = get_or<bool>(j, "include_self", field, true);
      Graph graph = parse_graph(require(j, "graph", field), include_self, join(field, "graph"), ctx);
      Matrix W = parse_matrix(require(j, "W", field), join(field, "W"), ctx);
      if (j.contains("rescale_to")) {
        const double target = value_as<double>(j["rescale_to"], join(field, "rescale_to"));
        const Index alpha_max = gnn_lipschitz_report(GnnAggregateOperator(graph, W)).alpha_max;
        W = rescale_to_contraction(W, alpha_max, target);
      }
      return std::make_shared<GnnAggregateOperator>(std::move(graph), std::move(W));
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(field, e.what());
  }
  throw ConfigError(join(field, "type"), "unknown operator type '" + type + "'");
}

PicardConfig parse_picard(const json& j, const std::string& field) {
  PicardConfig cfg;
  if (j.is_null()) return cfg;
  cfg.lambda = get_or<double>(j, "lambda", field, cfg.lambda);
  cfg.epsilon = get_or<double>(j, "epsilon", field, cfg.epsilon);
  cfg.max_iter = get_or<int>(j, "max_iter", field, cfg.max_iter);
  cfg.smoothing = get_or<double>(j, "smoothing", field, cfg.smoothing);
  try {
    cfg.norm_kind = parse_norm_kind(get_or<std::string>(j, "norm", field, to_string(cfg.norm_kind)));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(join(field, "norm"), e.what());
  }
  try {
    cfg.stop = parse_stop_rule(get_or<std::string>(j, "stop", field, to_string(cfg.stop)));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(join(field, "stop"), e.what());
  }
  if (cfg.lambda == 0.0) throw ConfigError(join(field, "lambda"), "must be nonzero");
  if (!(cfg.epsilon > 0.0)) throw ConfigError(join(field, "epsilon"), "must be positive");
  if (cfg.max_iter < 1) throw ConfigError(join(field, "max_iter"), "must be at least 1");
  if (!(cfg.smoothing >= 0.0 && cfg.smoothing <= 1.0)) throw ConfigError(join(field, "smoothing"), "must lie in [0, 1]");
  return cfg;
}

json picard_to_json(const PicardConfig& cfg) {
  return {{"lambda", cfg.lambda},     {"epsilon", cfg.epsilon},          {"max_iter", cfg.max_iter},
          {"smoothing", cfg.smoothing}, {"norm", to_string(cfg.norm_kind)}, {"stop", to_string(cfg.stop)}};
}

SolveSetup parse_solve_setup(const json& root, const ConfigContext& ctx) {
  SolveSetup s;
  s.op = build_operator(require(root, "operator", ""), "operator", ctx);
  const json picard = root.contains("picard") ? root["picard"] : json::object();
  s.picard = parse_picard(picard, "picard");
  if (picard.contains("k")) {
    s.contraction = value_as<double>(picard["k"], "picard.k");
    if (!(*s.contraction > 0.0)) throw ConfigError("picard.k", "must be positive");
  }
  s.f = root.contains("f") ? parse_vector(root["f"], s.op->dim(), "f", ctx) : Vector::Zero(s.op->dim());
  return s;
}

ExperimentConfig parse_experiment(const json& root, const ConfigContext& ctx) {
  ExperimentConfig cfg;
  const json empty = json::object();
  auto section = [&](const char* key) -> const json& {
    if (!root.is_object()) throw ConfigError("config", "expected an object");
    auto it = root.find(key);
    return it == root.end() ? empty : *it;
  };

  const json& ds = section("dataset");
  cfg.dataset.n = get_or<Index>(ds, "n", "dataset", cfg.dataset.n);
  cfg.dataset.d = get_or<Index>(ds, "d", "dataset", cfg.dataset.d);
  cfg.dataset.p_in = get_or<double>(ds, "p_in", "dataset", cfg.dataset.p_in);
  cfg.dataset.p_out = get_or<double>(ds, "p_out", "dataset", cfg.dataset.p_out);
  cfg.dataset.separation = get_or<double>(ds, "separation", "dataset", cfg.dataset.separation);
  cfg.dataset.seed = get_or<std::uint64_t>(ds, "seed", "dataset", ctx.seed);

  const json& noise = section("noise");
  cfg.noise_p = get_or<double>(noise, "p", "noise", cfg.noise_p);
  cfg.noise_magnitude = get_or<double>(noise, "magnitude", "noise", cfg.noise_magnitude);
  cfg.noise_seed = get_or<std::uint64_t>(noise, "seed", "noise", cfg.noise_seed);

  const json& op = section("operator");
  cfg.operator_dim = get_or<Index>(op, "dim", "operator", cfg.operator_dim);
  cfg.target_contraction = get_or<double>(op, "target_contraction", "operator", cfg.target_contraction);
  cfg.operator_seed = get_or<std::uint64_t>(op, "seed", "operator", cfg.operator_seed);

  const json& pic = section("picard");
  cfg.alpha = get_or<double>(pic, "alpha", "picard", cfg.alpha);
  cfg.epsilon = get_or<double>(pic, "epsilon", "picard", cfg.epsilon);
  cfg.max_iter = get_or<int>(pic, "max_iter", "picard", cfg.max_iter);

  const json& ro = section("readout");
  cfg.lr = get_or<double>(ro, "lr", "readout", cfg.lr);
  cfg.epochs = get_or<int>(ro, "epochs", "readout", cfg.epochs);
  cfg.split_seed = get_or<std::uint64_t>(ro, "split_seed", "readout", cfg.split_seed);

  try {
    cfg.mode = parse_pign_mode(get_or<std::string>(root, "mode", "", to_string(cfg.mode)));
  } catch (const std::invalid_argument& e) {
    throw ConfigError("mode", e.what());
  }

  const PlantedPartitionParams& d = cfg.dataset;
  if (d.n < 2 || d.n % 2 != 0) throw ConfigError("dataset.n", "must be even and at least 2");
  if (d.d < 1) throw ConfigError("dataset.d", "must be positive");
  if (!(d.p_out >= 0.0 && d.p_out < d.p_in && d.p_in <= 1.0))
    throw ConfigError("dataset.p_in", "need 0 <= p_out < p_in <= 1");
  if (!(cfg.noise_p >= 0.0 && cfg.noise_p <= 1.0)) throw ConfigError("noise.p", "must lie in [0, 1]");
  if (!(cfg.noise_magnitude > 0.0)) throw ConfigError("noise.magnitude", "must be positive");
  if (cfg.operator_dim != 0 && cfg.operator_dim < d.d)
    throw ConfigError("operator.dim", "must be at least dataset.d");
  if (!(cfg.target_contraction > 0.0 && cfg.target_contraction < 1.0))
    throw ConfigError("operator.target_contraction", "must lie in (0, 1)");
  if (!(cfg.alpha >= 0.0 && cfg.alpha <= 1.0)) throw ConfigError("picard.alpha", "must lie in [0, 1]");
  if (!(cfg.epsilon > 0.0)) throw ConfigError("picard.epsilon", "must be positive");
  if (cfg.max_iter < 1) throw ConfigError("picard.max_iter", "must be at least 1");
  if (!(cfg.lr > 0.0)) throw ConfigError("readout.lr", "must be positive");
  if (cfg.epochs < 1) throw ConfigError("readout.epochs", "must be at least 1");
  return cfg;
}

json experiment_to_json(const ExperimentConfig& cfg) {
  const auto& d = cfg.dataset;
  return {{"dataset", {{"n", d.n}, {"d", d.d}, {"p_in", d.p_in}, {"p_out", d.p_out},
                       {"separation", d.separation}, {"seed", d.seed}}},
          {"noise", {{"p", cfg.noise_p}, {"magnitude", cfg.noise_magnitude}, {"seed", cfg.noise_seed}}},
          {"operator", {{"dim", cfg.operator_dim == 0 ? d.d : cfg.operator_dim},
                        {"target_contraction", cfg.target_contraction},
                        {"seed", cfg.operator_seed}}},
          {"picard", {{"alpha", cfg.alpha}, {"epsilon", cfg.epsilon}, {"max_iter", cfg.max_iter}}},
          {"readout", {{"lr", cfg.lr}, {"epochs", cfg.epochs}, {"split_seed", cfg.split_seed}}},
          {"mode", to_string(cfg.mode)}};
}

}  // namespace fixpoint
