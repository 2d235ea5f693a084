#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "fixpoint/calculus.hpp"
#include "fixpoint/config.hpp"

using namespace fixpoint;

namespace {

std::string field_of(const std::function<void()>& body) {
  try {
    body();
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<no error>";
}

}  // namespace

TEST(ParseMatrix, InlineAndGenerated) {
  const ConfigContext ctx;
  const Matrix m = parse_matrix(json::parse("[[1, 2], [3, 4]]"), "A", ctx);
  EXPECT_EQ(m(1, 0), 3.0);
  EXPECT_EQ(parse_matrix(json::parse(R"({"identity": 3, "scale": 0.5})"), "A", ctx), 0.5 * Matrix::Identity(3, 3));
  EXPECT_TRUE(parse_matrix(json::parse(R"({"zero": 2})"), "A", ctx).isZero(0.0));
  EXPECT_EQ(parse_matrix(json::parse(R"({"diag": [1, 2]})"), "A", ctx)(1, 1), 2.0);

  const Matrix r = parse_matrix(json::parse(R"({"random": {"dim": 5, "seed": 3, "spectral_norm": 0.7}})"), "A", ctx);
  EXPECT_NEAR(spectral_norm(r), 0.7, 1e-9);
  EXPECT_EQ(r, parse_matrix(json::parse(R"({"random": {"dim": 5, "seed": 3, "spectral_norm": 0.7}})"), "A", ctx));
}

TEST(ParseMatrix, FromFileRelativeToConfig) {
  const auto dir = std::filesystem::temp_directory_path() / "fixpoint_config_test";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "A.txt") << "0.5 0\n0 0.25\n";
  ConfigContext ctx;
  ctx.base_dir = dir;
  EXPECT_EQ(parse_matrix(json("A.txt"), "A", ctx)(1, 1), 0.25);
  EXPECT_EQ(parse_matrix(json::parse(R"({"path": "A.txt"})"), "A", ctx)(0, 0), 0.5);
  EXPECT_EQ(field_of([&] { parse_matrix(json("missing.txt"), "operator.A", ctx); }), "operator.A");
}

TEST(ParseMatrix, ErrorsNameTheField) {
  const ConfigContext ctx;
  EXPECT_EQ(field_of([&] { parse_matrix(json::parse("[[1, 2], [3]]"), "operator.A", ctx); }), "operator.A");
  EXPECT_EQ(field_of([&] { parse_matrix(json::parse(R"({"what": 1})"), "operator.Wq", ctx); }), "operator.Wq");
  EXPECT_EQ(field_of([&] { parse_matrix(json::parse("[[\"x\"]]"), "W", ctx); }), "W");
}

TEST(ParseVector, Forms) {
  const ConfigContext ctx;
  EXPECT_EQ(parse_vector(json::parse("[1, 2, 3]"), 3, "f", ctx)(2), 3.0);
  EXPECT_EQ(parse_vector(json::parse(R"({"constant": 2})"), 4, "f", ctx), Vector::Constant(4, 2.0));
  EXPECT_EQ(parse_vector(json(1.5), 2, "f", ctx), Vector::Constant(2, 1.5));
  EXPECT_TRUE(parse_vector(json::parse(R"({"zero": true})"), 3, "f", ctx).isZero(0.0));
  const Vector r = parse_vector(json::parse(R"({"random": {"seed": 5, "scale": 2}})"), 6, "f", ctx);
  EXPECT_EQ(r, parse_vector(json::parse(R"({"random": {"seed": 5, "scale": 2}})"), 6, "f", ctx));
  EXPECT_EQ(field_of([&] { parse_vector(json::parse("[1, 2]"), 3, "f", ctx); }), "f");
}

TEST(BuildOperator, AllTypes) {
  const ConfigContext ctx;
  const auto affine = build_operator(json::parse(R"({"type": "affine", "A": [[0.5]], "b": [1]})"), "operator", ctx);
  EXPECT_EQ(affine->apply(Vector::Ones(1))(0), 1.5);

  const auto attention = build_operator(
      json::parse(R"({"type": "attention", "Wq": [[1]], "Wk": [[1]], "Wv": [[1]], "tokens": 2})"), "operator", ctx);
  EXPECT_EQ(attention->dim(), 2);

  const auto ham = build_operator(json::parse(R"({"type": "hammerstein",
      "grid": {"n": 11},
      "kernel": {"name": "product", "params": [1], "nonlinearity": "tanh"}})"),
                                  "operator", ctx);
  EXPECT_EQ(ham->dim(), 11);
  EXPECT_TRUE(ham->output_bound().has_value());

  const auto gnn = build_operator(json::parse(R"({"type": "gnn",
      "graph": {"n": 3, "edges": [[0, 1], [1, 2]]},
      "W": {"identity": 2}, "rescale_to": 0.5})"),
                                  "operator", ctx);
  const auto& g = dynamic_cast<const GnnAggregateOperator&>(*gnn);
  EXPECT_NEAR(gnn_lipschitz_report(g).product, 0.5, 1e-12);
  EXPECT_TRUE(g.graph().include_self());

  const auto pp = build_operator(json::parse(R"({"type": "gnn", "include_self": false,
      "graph": {"planted_partition": {"n": 20, "p_in": 0.5, "p_out": 0.05, "seed": 1}},
      "W": {"identity": 2}})"),
                                 "operator", ctx);
  EXPECT_EQ(pp->dim(), 40);
}

TEST(BuildOperator, ErrorsNameTheField) {
  const ConfigContext ctx;
  EXPECT_EQ(field_of([&] { build_operator(json::parse(R"({"type": "spline"})"), "operator", ctx); }), "operator.type");
  EXPECT_EQ(field_of([&] { build_operator(json::parse(R"({"type": "affine"})"), "operator", ctx); }), "operator.A");
  EXPECT_EQ(field_of([&] { build_operator(json::parse(R"({"A": [[1]]})"), "operator", ctx); }), "operator.type");
  EXPECT_EQ(field_of([&] {
              build_operator(json::parse(R"({"type": "gnn", "graph": {"n": 2, "edges": [[0, 5]]}, "W": [[1]]})"),
                             "operator", ctx);
            }),
            "operator.graph");
  EXPECT_EQ(field_of([&] {
              build_operator(json::parse(R"({"type": "hammerstein", "grid": {"n": 4, "rule": "simpson"},
                                             "kernel": {"name": "zero"}})"),
                             "operator", ctx);
            }),
            "operator.grid");
}

TEST(ParsePicard, DefaultsOverridesAndErrors) {
  const PicardConfig d = parse_picard(json::object(), "picard");
  EXPECT_EQ(d.lambda, 1.0);
  EXPECT_EQ(d.stop, StopRule::StepNorm);
  const PicardConfig c = parse_picard(
      json::parse(R"({"lambda": -0.5, "epsilon": 1e-8, "max_iter": 7, "smoothing": 0.25, "norm": "sup",
                      "stop": "residual"})"),
      "picard");
  EXPECT_EQ(c.lambda, -0.5);
  EXPECT_EQ(c.max_iter, 7);
  EXPECT_EQ(c.norm_kind, NormKind::Sup);
  EXPECT_EQ(c.stop, StopRule::Residual);
  EXPECT_EQ(parse_picard(picard_to_json(c), "picard").smoothing, 0.25);

  EXPECT_EQ(field_of([] { parse_picard(json::parse(R"({"lambda": 0})"), "picard"); }), "picard.lambda");
  EXPECT_EQ(field_of([] { parse_picard(json::parse(R"({"epsilon": -1})"), "picard"); }), "picard.epsilon");
  EXPECT_EQ(field_of([] { parse_picard(json::parse(R"({"norm": "l7"})"), "picard"); }), "picard.norm");
  EXPECT_EQ(field_of([] { parse_picard(json::parse(R"({"max_iter": "many"})"), "picard"); }), "picard.max_iter");
}

TEST(SolveSetup, DefaultsFToZeroAndReadsK) {
  const ConfigContext ctx;
  const SolveSetup s = parse_solve_setup(
      json::parse(R"({"operator": {"type": "affine", "A": [[0.5, 0], [0, 0.5]]}, "picard": {"k": 0.6}})"), ctx);
  EXPECT_TRUE(s.f.isZero(0.0));
  EXPECT_EQ(*s.contraction, 0.6);
  EXPECT_EQ(field_of([&] { parse_solve_setup(json::parse("{}"), ctx); }), "operator");
}

TEST(Experiment, ParsesAndValidates) {
  ConfigContext ctx;
  ctx.seed = 42;
  const ExperimentConfig cfg = parse_experiment(
      json::parse(R"({"noise": {"p": 0.5}, "picard": {"alpha": 0.25}, "mode": "homogeneous"})"), ctx);
  EXPECT_EQ(cfg.noise_p, 0.5);
  EXPECT_EQ(cfg.alpha, 0.25);
  EXPECT_EQ(cfg.mode, PignMode::Homogeneous);
  EXPECT_EQ(cfg.dataset.seed, 42u);
  const json round = experiment_to_json(cfg);
  EXPECT_EQ(round["operator"]["dim"], 8);
  EXPECT_EQ(parse_experiment(round, ctx).noise_p, 0.5);

  EXPECT_EQ(field_of([&] { parse_experiment(json::parse(R"({"noise": {"p": 2}})"), ctx); }), "noise.p");
  EXPECT_EQ(field_of([&] { parse_experiment(json::parse(R"({"dataset": {"n": 7}})"), ctx); }), "dataset.n");
  EXPECT_EQ(field_of([&] { parse_experiment(json::parse(R"({"mode": "upside"})"), ctx); }), "mode");
  EXPECT_EQ(field_of([&] { parse_experiment(json::parse(R"({"operator": {"target_contraction": 1}})"), ctx); }),
            "operator.target_contraction");
}

TEST(LoadJson, ReportsMissingAndMalformed) {
  EXPECT_EQ(field_of([] { load_json_file("/nonexistent/config.json"); }), "config");
  const auto path = std::filesystem::temp_directory_path() / "fixpoint_bad.json";
  std::ofstream(path) << "{ not json";
  EXPECT_EQ(field_of([&] { load_json_file(path); }), "config");
}

TEST(Grid, ParseAndSerialize) {
  const Grid g = parse_grid(json::parse(R"({"a": 0, "b": 2, "n": 5, "rule": "simpson"})"), "grid");
  EXPECT_EQ(g.rule(), QuadratureRule::Simpson);
  EXPECT_EQ(parse_grid(grid_to_json(g), "grid"), g);
}
