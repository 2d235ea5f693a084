#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fixpoint/commands.hpp"

namespace fs = std::filesystem;
using namespace fixpoint::cli;
using nlohmann::json;

namespace {

const fs::path kConfigs = fs::path(FIXPOINT_SOURCE_DIR) / "configs";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    root_ = fs::temp_directory_path() / "fixpoint_cli" / info->name();
    fs::remove_all(root_);
    fs::create_directories(root_);
  }

  RunOptions options(const fs::path& config, const std::string& out = "out", std::uint64_t seed = 0) {
    RunOptions o;
    o.config_path = config;
    o.out_dir = root_ / out;
    o.seed = seed;
    o.quiet = true;
    return o;
  }

  fs::path write_config(const std::string& name, const std::string& text) {
    const fs::path p = root_ / name;
    std::ofstream(p) << text;
    return p;
  }

  fs::path root_;
};

}  // namespace

TEST_F(CliTest, SolveAffineContraction) {
  const RunOptions o = options(kConfigs / "affine_solve.json");
  EXPECT_EQ(cmd_solve(o), kSuccess);
  const json summary = json::parse(slurp(o.out_dir / "summary.json"));
  EXPECT_TRUE(summary["converged"].get<bool>());
  EXPECT_LE(summary["final_residual"].get<double>(), 1e-10);
  const std::string trace = slurp(o.out_dir / "trace.csv");
  EXPECT_EQ(trace.substr(0, trace.find('\n')), "iter,step_norm,residual,apriori_bound,aposteriori_bound,actual_error");

  const json manifest = json::parse(slurp(o.out_dir / "manifest.json"));
  EXPECT_EQ(manifest["command"], "solve");
  EXPECT_EQ(manifest["tool_version"], kToolVersion);
  EXPECT_EQ(manifest["seed"], 0);
  EXPECT_EQ(manifest["config"]["picard"]["norm"], "l2");
}

TEST_F(CliTest, SolveDivergesWithExitThree) {
  const RunOptions o = options(kConfigs / "diverge.json");
  EXPECT_EQ(cmd_solve(o), kDiverged);
  EXPECT_TRUE(fs::exists(o.out_dir / "trace.csv"));
  EXPECT_TRUE(json::parse(slurp(o.out_dir / "summary.json"))["diverged"].get<bool>());
}

TEST_F(CliTest, SolveStopsEarlyWithExitTwo) {
  const fs::path cfg = write_config("slow.json", R"({
    "operator": {"type": "affine", "A": {"identity": 3, "scale": 0.99}, "b": [1, 1, 1]},
    "picard": {"max_iter": 1}})");
  const RunOptions o = options(cfg);
  EXPECT_EQ(cmd_solve(o), kNotConverged);
  const std::string trace = slurp(o.out_dir / "trace.csv");
  EXPECT_EQ(std::count(trace.begin(), trace.end(), '\n'), 2);
}

TEST_F(CliTest, ConfigErrorsExitOne) {
  const fs::path bad_field = write_config("bad.json", R"({"operator": {"type": "affine", "A": [[0.5]]},
                                                          "picard": {"epsilon": -1}})");
  EXPECT_EQ(cmd_solve(options(bad_field)), kConfigError);
  const fs::path bad_json = write_config("broken.json", "{");
  EXPECT_EQ(cmd_solve(options(bad_json)), kConfigError);
  EXPECT_EQ(cmd_solve(options(root_ / "absent.json")), kConfigError);
  EXPECT_EQ(run_command("transmogrify", options(bad_json)), kConfigError);
}

TEST_F(CliTest, RatesScalarDemoBoundsDominate) {
  const RunOptions o = options(kConfigs / "scalar_rates.json");
  EXPECT_EQ(cmd_rates(o), kSuccess);
  std::istringstream csv(slurp(o.out_dir / "rates.csv"));
  std::string line;
  std::getline(csv, line);
  int rows = 0;
  while (std::getline(csv, line)) {
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
    cols.resize(6);
    const double apriori = std::stod(cols[3]);
    const double actual = std::stod(cols[5]);
    EXPECT_LE(actual, apriori * (1 + 1e-12) + 1e-15) << line;
    if (!cols[4].empty()) EXPECT_LE(actual, std::stod(cols[4]) * (1 + 1e-12) + 1e-15) << line;
    if (rows == 0) EXPECT_DOUBLE_EQ(apriori, 2.0);
    ++rows;
  }
  EXPECT_GT(rows, 10);
}

TEST_F(CliTest, RatesNearCriticalBoundsAreLooseButValid) {
  const RunOptions o = options(kConfigs / "near_critical_rates.json");
  EXPECT_EQ(cmd_rates(o), kSuccess);
  std::istringstream csv(slurp(o.out_dir / "rates.csv"));
  std::string line;
  std::getline(csv, line);
  double max_ratio = 0.0;
  while (std::getline(csv, line)) {
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
    cols.resize(6);
    const double apriori = std::stod(cols[3]), actual = std::stod(cols[5]);
    EXPECT_LE(actual, apriori);
    max_ratio = std::max(max_ratio, apriori / actual);
  }
  EXPECT_GT(max_ratio, 100.0);
}

TEST_F(CliTest, RatesRefusesNonContraction) {
  EXPECT_EQ(cmd_rates(options(kConfigs / "diverge.json")), kConfigError);
}

TEST_F(CliTest, LipschitzFrechetAndCertificate) {
  RunOptions o = options(kConfigs / "lipschitz_affine.json", "lip");
  EXPECT_EQ(cmd_lipschitz(o), kSuccess);
  const json lip = json::parse(slurp(o.out_dir / "lipschitz.json"));
  EXPECT_EQ(lip["method"], "pair-sampling");
  EXPECT_FALSE(lip["is_upper_bound"].get<bool>());
  EXPECT_LE(lip["value"].get<double>(), 0.9 + 1e-9);

  o = options(kConfigs / "attention_frechet.json", "frechet");
  EXPECT_EQ(cmd_frechet_check(o), kSuccess);
  const json fr = json::parse(slurp(o.out_dir / "frechet.json"));
  EXPECT_LE(fr["max_rel_error"].get<double>(), 1e-6);
  EXPECT_NEAR(fr["order_slope"].get<double>(), 2.0, 0.1);

  o = options(kConfigs / "gnn_cert.json", "cert");
  EXPECT_EQ(cmd_gnn_cert(o), kSuccess);
  const json cert = json::parse(slurp(o.out_dir / "certificate.json"));
  for (const char* key : {"L", "alpha_max", "product", "certified", "rescaled_W_path"})
    EXPECT_TRUE(cert.contains(key)) << key;
  EXPECT_TRUE(fs::exists(o.out_dir / cert["rescaled_W_path"].get<std::string>()));
}

TEST_F(CliTest, PignAndSweepAreByteIdenticalOnRerun) {
  for (const std::string cmd : {"pign", "sweep"}) {
    const fs::path cfg = kConfigs / (cmd == "pign" ? "pign_noisy.json" : "sweep_noise.json");
    const RunOptions a = options(cfg, cmd + "_a", 3), b = options(cfg, cmd + "_b", 3);
    EXPECT_EQ(run_command(cmd, a), kSuccess);
    EXPECT_EQ(run_command(cmd, b), kSuccess);
    for (const auto& entry : fs::recursive_directory_iterator(a.out_dir)) {
      if (!entry.is_regular_file()) continue;
      const fs::path rel = fs::relative(entry.path(), a.out_dir);
      EXPECT_EQ(slurp(entry.path()), slurp(b.out_dir / rel)) << rel;
    }
  }
}

TEST_F(CliTest, SweepCsvHasOneRowPerValue) {
  const RunOptions o = options(kConfigs / "sweep_noise.json");
  EXPECT_EQ(cmd_sweep(o), kSuccess);
  const json sweep = json::parse(slurp(kConfigs / "sweep_noise.json"))["sweep"];
  const std::string csv = slurp(o.out_dir / "sweep.csv");
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), sweep["values"].size() + 1);
}

TEST_F(CliTest, SweepOverSolveReportsWorstExitCode) {
  const fs::path cfg = write_config("sweep.json", R"({
    "sweep": {"command": "solve", "field": "picard.max_iter", "values": [1, 500]},
    "base": {"operator": {"type": "affine", "A": {"identity": 2, "scale": 0.5}, "b": [1, 1]},
             "picard": {"epsilon": 1e-10}}})");
  const RunOptions o = options(cfg);
  EXPECT_EQ(cmd_sweep(o), kNotConverged);
  const std::string csv = slurp(o.out_dir / "sweep.csv");
  EXPECT_NE(csv.find("1,false,1,"), std::string::npos);
  EXPECT_NE(csv.find("500,true,"), std::string::npos);
}
