#include <CLI11.hpp>

#include <string>
#include <vector>

#include "fixpoint/commands.hpp"

int main(int argc, char** argv) {
  using namespace fixpoint::cli;
  CLI::App app{"Picard iteration and fixed-point toolkit"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  RunOptions opts;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"solve", "Run Picard iteration and write trace.csv and summary.json"},
      {"rates", "Compare the iteration error against a priori and a posteriori bounds"},
      {"lipschitz", "Estimate an operator's Lipschitz constant"},
      {"frechet-check", "Check the attention derivative against finite differences"},
      {"gnn-cert", "Certify a max-pool GNN aggregation as a contraction"},
      {"pign", "Run the PIGN experiment over a list of seeds"},
      {"sweep", "Repeat solve or pign over a list of values for one config field"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opts.config_path, "JSON config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", opts.out_dir, "Output directory")->capture_default_str();
    sub->add_option("--seed", opts.seed, "Base seed")->capture_default_str();
    sub->add_flag("--quiet", opts.quiet, "Suppress progress output");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kSuccess : kConfigError;
  }
  return run_command(app.get_subcommands().front()->get_name(), opts);
}
