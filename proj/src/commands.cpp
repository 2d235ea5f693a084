#include "fixpoint/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "fixpoint/calculus.hpp"
#include "fixpoint/config.hpp"
#include "fixpoint/picard.hpp"
#include "fixpoint/pign.hpp"
#include "fixpoint/report.hpp"

namespace fixpoint::cli {

namespace {

struct Loaded {
  json root;
  ConfigContext ctx;
};

Loaded load(const RunOptions& opts) {
  Loaded l;
  l.root = load_json_file(opts.config_path);
  l.ctx.base_dir = opts.config_path.has_parent_path() ? opts.config_path.parent_path() : ".";
  l.ctx.seed = opts.seed;
  return l;
}

void write_manifest(const RunOptions& opts, const std::string& command, const json& resolved) {
  const json manifest = {{"command", command},
                         {"tool_version", kToolVersion},
                         {"seed", opts.seed},
                         {"config_path", opts.config_path.generic_string()},
                         {"config", resolved}};
  write_file_atomic(opts.out_dir / "manifest.json", dump_json(manifest));
}

void say(const RunOptions& opts, const std::string& line) {
  if (!opts.quiet) std::cout << line << '\n';
}

/// Runs `body`, mapping failures onto the exit-code contract.
int guarded(const RunOptions& opts, const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << '\n';
    return kDiverged;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    (void)opts;
    return kConfigError;
  }
}

json solve_resolved(const json& root, const SolveSetup& s) {
  json resolved = root;
  json picard = picard_to_json(s.picard);
  if (s.contraction) picard["k"] = *s.contraction;
  resolved["picard"] = picard;
  return resolved;
}

struct SolveOutcome {
  int code = kSuccess;
  std::string trace_csv;
  json summary;
};

SolveOutcome run_solve(const SolveSetup& s) {
  SolveOutcome out;
  try {
    const SolveResult r = picard_solve(*s.op, s.picard, s.f);
    const double final_residual =
        residual(*s.op, s.picard.lambda, s.f, r.solution, resolve_norm(s.picard.norm_kind, *s.op));
    out.trace_csv = trace_csv(r.trace);
    out.summary = {{"converged", r.trace.converged},
                   {"diverged", false},
                   {"iterations_used", r.trace.iterations_used},
                   {"final_residual", final_residual}};
    out.code = r.trace.converged ? kSuccess : kNotConverged;
  } catch (const IterationDiverged& e) {
    out.trace_csv = trace_csv(e.trace());
    out.summary = {{"converged", false},
                   {"diverged", true},
                   {"iterations_used", e.trace().iterations_used},
                   {"final_residual", nullptr},
                   {"message", e.what()}};
    out.code = kDiverged;
  }
  return out;
}

/// Contraction constant of the iteration map x -> alpha x + (1 - alpha)(f + lambda T(x)).
double iteration_contraction(const SolveSetup& s) {
  double k = 0.0;
  if (s.contraction) {
    k = *s.contraction;
  } else {
    const auto bound = s.op->lipschitz_bound();
    if (!bound)
      throw ConfigError("picard.k", "operator '" + s.op->name() +
                                        "' has no closed-form Lipschitz constant; set picard.k");
    k = std::abs(s.picard.lambda) * *bound;
  }
  return s.picard.smoothing + (1.0 - s.picard.smoothing) * k;
}

}  // namespace

int cmd_solve(const RunOptions& opts) {
  return guarded(opts, [&] {
    const Loaded l = load(opts);
    const SolveSetup s = parse_solve_setup(l.root, l.ctx);
    write_manifest(opts, "solve", solve_resolved(l.root, s));
    const SolveOutcome o = run_solve(s);
    write_file_atomic(opts.out_dir / "trace.csv", o.trace_csv);
    write_file_atomic(opts.out_dir / "summary.json", dump_json(o.summary));
    say(opts, "solve: " + o.summary.dump());
    return o.code;
  });
}

int cmd_rates(const RunOptions& opts) {
  return guarded(opts, [&] {
    const Loaded l = load(opts);
    SolveSetup s = parse_solve_setup(l.root, l.ctx);
    const double k = iteration_contraction(s);
    if (!(k > 0.0 && k < 1.0))
      throw ConfigError("picard.k", "contraction constant " + format_number(k) + " is not in (0, 1)");
    json resolved = solve_resolved(l.root, s);
    resolved["rates"] = {{"k", k}, {"reference_epsilon", 1e-13}};
    write_manifest(opts, "rates", resolved);

    PicardConfig ref_cfg = s.picard;
    ref_cfg.epsilon = 1e-13;
    ref_cfg.max_iter = std::max(100000, s.picard.max_iter);
    const Vector reference = picard_solve(*s.op, ref_cfg, s.f).solution;

    s.picard.record_iterates = true;
    const SolveResult r = picard_solve(*s.op, s.picard, s.f);
    const auto bounds = banach_bounds(r.trace, k, reference, resolve_norm(s.picard.norm_kind, *s.op));
    write_file_atomic(opts.out_dir / "rates.csv", trace_csv(r.trace, &bounds));
    say(opts, "rates: k = " + format_number(k) + ", " + std::to_string(bounds.size()) + " rows");
    return r.trace.converged ? kSuccess : kNotConverged;
  });
}

int cmd_lipschitz(const RunOptions& opts) {
  return guarded(opts, [&] {
    const Loaded l = load(opts);
    const OperatorPtr op = build_operator(l.root.at("operator"), "operator", l.ctx);
    const json lj = l.root.contains("lipschitz") ? l.root["lipschitz"] : json::object();
    const std::string method = lj.value("method", std::string("pair-sampling"));
    const auto n = lj.value("n", std::size_t{1000});
    const double radius = lj.value("radius", 1.0);
    const std::uint64_t seed = lj.value("seed", opts.seed);

    LipschitzEstimate est;
    if (method == "pair-sampling") {
      PairSampler sampler;
      sampler.radius = radius;
      est = lipschitz_sample(*op, sampler, n, seed);
    } else if (method == "derivative-bound") {
      est = derivative_bound_lipschitz(*op, Ball{Vector(), radius}, n, seed);
    } else if (method == "spectral-power-iteration") {
      const auto* affine = dynamic_cast<const AffineOperator*>(op.get());
      if (!affine) throw ConfigError("lipschitz.method", "spectral-power-iteration needs an affine operator");
      est = spectral_lipschitz(affine->matrix());
    } else {
      throw ConfigError("lipschitz.method", "unknown method '" + method + "'");
    }
    json resolved = l.root;
    resolved["lipschitz"] = {{"method", method}, {"n", n}, {"radius", radius}, {"seed", seed}};
    write_manifest(opts, "lipschitz", resolved);
    const json record = to_json(est);
    write_file_atomic(opts.out_dir / "lipschitz.json", dump_json(record));
    say(opts, "lipschitz: " + record.dump());
    return kSuccess;
  });
}

int cmd_frechet_check(const RunOptions& opts) {
  return guarded(opts, [&] {
    const Loaded l = load(opts);
    const json fj = l.root.contains("frechet") ? l.root["frechet"] : json::object();
    const auto trials = fj.value("trials", std::size_t{100});
    const double step = fj.value("step", 1e-5);
    const double order_step = fj.value("order_step", 1e-2);
    const std::uint64_t seed = fj.value("seed", opts.seed);
    const auto max_width = fj.value("max_width", Index{8});
    const auto max_tokens = fj.value("max_tokens", Index{8});

    OperatorPtr op;
    const AttentionOperator* attention = nullptr;
    if (l.root.contains("operator")) {
      op = build_operator(l.root["operator"], "operator", l.ctx);
      attention = dynamic_cast<const AttentionOperator*>(op.get());
      if (!attention) throw ConfigError("operator.type", "frechet-check needs an attention operator");
    }
    json resolved = l.root;
    resolved["frechet"] = {{"trials", trials},         {"step", step},          {"order_step", order_step},
                           {"seed", seed},             {"max_width", max_width}, {"max_tokens", max_tokens}};
    write_manifest(opts, "frechet-check", resolved);

    const FrechetSuiteReport r =
        frechet_consistency_suite(attention, trials, step, order_step, seed, max_width, max_tokens);
    const json report = {{"trials", r.trials},
                         {"step", r.step},
                         {"max_rel_error", r.max_rel_error},
                         {"order_step", r.order_step},
                         {"min_halving_ratio", r.min_halving_ratio},
                         {"order_slope", r.order_slope}};
    write_file_atomic(opts.out_dir / "frechet.json", dump_json(report));
    say(opts, "frechet-check: " + report.dump());
    return kSuccess;
  });
}

int cmd_gnn_cert(const RunOptions& opts) {
  return guarded(opts, [&] {
    const Loaded l = load(opts);
    const OperatorPtr op = build_operator(l.root.at("operator"), "operator", l.ctx);
    const auto* gnn = dynamic_cast<const GnnAggregateOperator*>(op.get());
    if (!gnn) throw ConfigError("operator.type", "gnn-cert needs a gnn operator");
    const double target = l.root.contains("certificate") ? l.root["certificate"].value("target", 0.9) : 0.9;
    if (!(target > 0.0 && target < 1.0)) throw ConfigError("certificate.target", "must lie in (0, 1)");

    json resolved = l.root;
    resolved["certificate"] = {{"target", target}};
    write_manifest(opts, "gnn-cert", resolved);

    const GnnLipschitzReport report = gnn_lipschitz_report(*gnn);
    const Matrix rescaled = rescale_to_contraction(gnn->weight(), report.alpha_max, target);
    std::ostringstream wtext;
    for (Index r = 0; r < rescaled.rows(); ++r) {
      for (Index c = 0; c < rescaled.cols(); ++c) wtext << (c ? " " : "") << format_number(rescaled(r, c));
      wtext << '\n';
    }
    write_file_atomic(opts.out_dir / "W_rescaled.txt", wtext.str());

    json cert = to_json(report);
    cert["target"] = target;
    cert["rescaled_W_path"] = "W_rescaled.txt";
    write_file_atomic(opts.out_dir / "certificate.json", dump_json(cert));
    say(opts, "gnn-cert: L = " + format_number(report.L) + ", alpha_max = " + std::to_string(report.alpha_max) +
                  ", certified = " + (report.certified ? "true" : "false"));
    return kSuccess;
  });
}

namespace {

std::vector<std::uint64_t> experiment_seeds(const json& root, std::uint64_t base) {
  if (root.contains("seeds")) return root["seeds"].get<std::vector<std::uint64_t>>();
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = 0; s < 10; ++s) seeds.push_back(base + s);
  return seeds;
}

json experiment_summary(const std::vector<ExperimentRow>& rows) {
  double pign = 0.0, base = 0.0;
  for (const auto& r : rows) {
    pign += r.pign_acc;
    base += r.baseline_acc;
  }
  const double n = static_cast<double>(std::max<std::size_t>(rows.size(), 1));
  return {{"runs", rows.size()}, {"mean_pign_acc", pign / n}, {"mean_baseline_acc", base / n}};
}

}  // namespace

int cmd_pign(const RunOptions& opts) {
  return guarded(opts, [&] {
    const Loaded l = load(opts);
    const ExperimentConfig cfg = parse_experiment(l.root, l.ctx);
    const auto seeds = experiment_seeds(l.root, opts.seed);
    json resolved = experiment_to_json(cfg);
    resolved["seeds"] = seeds;
    write_manifest(opts, "pign", resolved);

    const auto rows = run_pign_seeds(cfg, seeds);
    write_file_atomic(opts.out_dir / "pign.csv", experiment_csv(rows));
    const json summary = experiment_summary(rows);
    write_file_atomic(opts.out_dir / "summary.json", dump_json(summary));
    say(opts, "pign: " + summary.dump());
    return kSuccess;
  });
}

namespace {

void set_dotted(json& root, const std::string& path, const json& value) {
  json* node = &root;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError("sweep.field", "malformed path '" + path + "'");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    if (!node->contains(key)) (*node)[key] = json::object();
    node = &(*node)[key];
    start = dot + 1;
  }
}

unsigned sweep_threads(std::size_t jobs) {
  unsigned cap = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("PICARD_OP_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) cap = static_cast<unsigned>(v);
  }
  return static_cast<unsigned>(std::min<std::size_t>(cap, std::max<std::size_t>(jobs, 1)));
}

}  // namespace

int cmd_sweep(const RunOptions& opts) {
  return guarded(opts, [&] {
    const Loaded l = load(opts);
    const json& sweep = l.root.at("sweep");
    const std::string command = sweep.value("command", std::string("pign"));
    if (command != "pign" && command != "solve") throw ConfigError("sweep.command", "must be 'pign' or 'solve'");
    const std::string field = sweep.at("field").get<std::string>();
    const json values = sweep.at("values");
    if (!values.is_array() || values.empty()) throw ConfigError("sweep.values", "need a non-empty list");
    json base = l.root.contains("base") ? l.root["base"] : json::object();
    if (l.root.contains("base_path")) base = load_json_file(l.ctx.base_dir / l.root["base_path"].get<std::string>());

    // Parse every variant up front so config errors surface before any work.
    std::vector<json> variants;
    for (const auto& v : values) {
      json variant = base;
      set_dotted(variant, field, v);
      if (command == "pign") parse_experiment(variant, l.ctx);
      else parse_solve_setup(variant, l.ctx);
      variants.push_back(std::move(variant));
    }
    write_manifest(opts, "sweep", l.root);

    std::vector<std::string> lines(variants.size());
    std::vector<std::string> run_files(variants.size());
    std::vector<int> codes(variants.size(), kSuccess);
    std::mutex error_mutex;
    std::exception_ptr failure;

    auto run_one = [&](std::size_t i) {
      try {
        const std::string value = values[i].dump();
        std::ostringstream line;
        if (command == "pign") {
          const ExperimentConfig cfg = parse_experiment(variants[i], l.ctx);
          const auto rows = run_pign_seeds(cfg, experiment_seeds(variants[i], opts.seed));
          const json s = experiment_summary(rows);
          run_files[i] = experiment_csv(rows);
          double iters = 0.0;
          for (const auto& r : rows) iters += r.iters_used;
          line << value << ',' << format_number(s["mean_pign_acc"].get<double>()) << ','
               << format_number(s["mean_baseline_acc"].get<double>()) << ','
               << format_number(iters / static_cast<double>(rows.size()));
        } else {
          const SolveOutcome o = run_solve(parse_solve_setup(variants[i], l.ctx));
          run_files[i] = o.trace_csv;
          codes[i] = o.code;
          const json& s = o.summary;
          line << value << ',' << (s["converged"].get<bool>() ? "true" : "false") << ','
               << s["iterations_used"].get<int>() << ','
               << (s["final_residual"].is_null() ? std::string() : format_number(s["final_residual"].get<double>()));
        }
        lines[i] = line.str();
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!failure) failure = std::current_exception();
      }
    };

    const unsigned threads = sweep_threads(variants.size());
    std::vector<std::thread> pool;
    std::size_t next = 0;
    std::mutex next_mutex;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        while (true) {
          std::size_t i;
          {
            std::lock_guard<std::mutex> lock(next_mutex);
            if (next >= variants.size()) return;
            i = next++;
          }
          run_one(i);
        }
      });
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);

    std::ostringstream csv;
    csv << (command == "pign" ? "value,mean_pign_acc,mean_baseline_acc,mean_iters_used\n"
                              : "value,converged,iterations_used,final_residual\n");
    for (std::size_t i = 0; i < lines.size(); ++i) {
      csv << lines[i] << '\n';
      std::ostringstream name;
      name << "run_" << i << (command == "pign" ? "_pign.csv" : "_trace.csv");
      write_file_atomic(opts.out_dir / "runs" / name.str(), run_files[i]);
    }
    write_file_atomic(opts.out_dir / "sweep.csv", csv.str());
    say(opts, "sweep: " + std::to_string(lines.size()) + " runs over " + field);
    int code = kSuccess;
    for (int c : codes) code = std::max(code, c);
    return code;
  });
}

int run_command(const std::string& command, const RunOptions& opts) {
  if (command == "solve") return cmd_solve(opts);
  if (command == "rates") return cmd_rates(opts);
  if (command == "lipschitz") return cmd_lipschitz(opts);
  if (command == "frechet-check") return cmd_frechet_check(opts);
  if (command == "gnn-cert") return cmd_gnn_cert(opts);
  if (command == "pign") return cmd_pign(opts);
  if (command == "sweep") return cmd_sweep(opts);
  std::cerr << "unknown command '" << command << "'\n";
  return kConfigError;
}

}  // namespace fixpoint::cli
