#include "misspec/checks.hpp"
#include "misspec/experiments_io.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

using namespace misspec;

namespace {

struct CommonOptions {
  std::string config;
  std::string preset;
  std::uint64_t seed = 0;
  std::string out;
  int resolution = 0;
  std::size_t reps = 0;
  int threads = -1;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "JSON configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--preset", o.preset, "Start from a named preset (default, example1)");
  cmd->add_option("--seed", o.seed, "Master RNG seed");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--resolution", o.resolution, "Sampling grid cells per axis")->check(CLI::PositiveNumber);
  cmd->add_option("--reps", o.reps, "Replications per cell")->check(CLI::Range(2, 100000000));
  cmd->add_option("--threads", o.threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  cmd->add_flag("-q,--quiet", o.quiet, "Suppress progress output");
}

ExperimentConfig resolve(const CommonOptions& o, CLI::App* cmd) {
  ExperimentConfig c = !o.config.empty() ? load_config(o.config)
                                         : preset_config(o.preset.empty() ? "default" : o.preset);
  if (!o.config.empty() && !o.preset.empty()) throw ConfigError("--config and --preset are mutually exclusive");
  if (cmd->count("--seed")) c.seed = o.seed;
  if (cmd->count("--out")) c.output_dir = o.out;
  if (cmd->count("--resolution")) c.grid.cells_per_axis = o.resolution;
  if (cmd->count("--reps")) c.reps = o.reps;
  if (cmd->count("--threads")) c.threads = o.threads;
  c.validate();
  return c;
}

ProgressFn progress_fn(bool quiet) {
  if (quiet) return {};
  return [](const std::string& msg) { std::cerr << msg << '\n'; };
}

int analyze(const ExperimentConfig& c) {
  const Instance inst = build_instance(c);
  const InfluenceFunctionSet ifs = make_influence_functions(inst.problem, inst.family, inst.theta0);
  nlohmann::json reports = nlohmann::json::array();
  for (const auto& spec : c.directions) {
    const Direction u = build_direction(inst, spec);
    for (double alpha : c.alphas) {
      const AsymptoticReport r = asymptotic_report(ifs, u, alpha);
      std::printf("%s alpha=%g (%s)\n", r.direction.c_str(), alpha, to_string(r.regime).c_str());
      for (const auto& m : r.methods) {
        std::printf("  %-3s  ||b||_V=%-12.6g R=%-12.6g tr(V Var)/2=%-12.6g", to_string(m.method).c_str(),
                    m.bias_v_norm, m.limit_regret, m.variance_regret);
        if (r.regime == Regime::Balanced) std::printf(" E[G]=%.6g", m.expected_balanced_regret);
        std::printf("\n");
      }
      for (const auto& chk : r.checks) {
        std::printf("  %-28s %-9s margin=%.3g\n", chk.statement.c_str(), to_string(chk.verdict).c_str(), chk.margin);
      }
      reports.push_back(report_to_json(r));
    }
  }
  std::filesystem::create_directories(c.output_dir);
  const std::string path = (std::filesystem::path(c.output_dir) / "analysis.json").string();
  write_json(path, nlohmann::json{{"config", config_to_json(c)}, {"reports", reports}});
  std::printf("wrote %s\n", path.c_str());
  return 0;
}

void print_cells(const SweepResult& r) {
  for (const auto& cell : r.cells) {
    std::printf("%s n=%zu alpha=%g t=%.4g (%s)", cell.direction.c_str(), cell.n, cell.alpha, cell.t,
                to_string(cell.regime).c_str());
    if (!cell.error.empty()) {
      std::printf("  ERROR: %s\n", cell.error.c_str());
      continue;
    }
    std::printf("  lowest mean regret: %s\n", to_string(cell.best).c_str());
    for (const auto& s : cell.summaries) {
      std::printf("  %-3s mean=%-12.5g se=%-11.3g median=%-12.5g q25=%-12.5g q75=%-12.5g n=%zu err=%zu\n",
                  to_string(s.method).c_str(), s.mean, s.se, s.median, s.q25, s.q75, s.count, s.errors);
    }
    for (const auto& p : cell.paired) {
      std::printf("  %s-%s  %.5g +- %.3g\n", to_string(p.lhs).c_str(), to_string(p.rhs).c_str(), p.mean, p.se);
    }
  }
}

int run_sweep(const ExperimentConfig& c, bool quiet) {
  const SweepResult r = sweep(c, progress_fn(quiet));
  print_cells(r);
  for (const auto& path : emit(r, c.output_dir)) std::printf("wrote %s\n", path.c_str());
  return 0;
}

int simulate(ExperimentConfig c, const std::string& direction, double alpha, std::size_t n, bool quiet) {
  if (!direction.empty()) {
    std::vector<DirectionSpec> keep;
    for (const auto& d : c.directions) {
      if (d.kind == direction || d.name() == direction) keep.push_back(d);
    }
    if (keep.empty()) keep.push_back(DirectionSpec{direction, {}, 1.0});
    c.directions = {keep.front()};
  } else {
    c.directions = {c.directions.front()};
  }
  c.alphas = {alpha > 0.0 ? alpha : c.alphas.front()};
  c.ns = {n > 0 ? n : c.ns.front()};
  return run_sweep(c, quiet);
}

int check(const ExperimentConfig& c) {
  int failed = 0;
  const auto results = run_invariant_checks(c, [&](const CheckResult& r) {
    const char* tag = r.skipped ? "SKIP" : (r.passed ? "PASS" : "FAIL");
    if (!r.passed) ++failed;
    std::printf("[%s] %-60s value=%-11.3g tol=%-9.3g %s\n", tag, r.name.c_str(), r.value, r.tolerance,
                r.detail.c_str());
    std::fflush(stdout);
  });
  std::printf("%zu checks, %d failed\n", results.size(), failed);
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pipelines for data-driven newsvendor decisions under local misspecification"};
  app.require_subcommand(1);

  CommonOptions analyze_opts, simulate_opts, sweep_opts, check_opts;
  auto* analyze_cmd = app.add_subcommand("analyze", "Asymptotic biases, variances and limit regrets");
  add_common(analyze_cmd, analyze_opts);
  auto* simulate_cmd = app.add_subcommand("simulate", "Monte Carlo for a single (direction, n, alpha) cell");
  add_common(simulate_cmd, simulate_opts);
  std::string sim_direction;
  double sim_alpha = 0.0;
  std::size_t sim_n = 0;
  simulate_cmd->add_option("--direction", sim_direction, "Direction kind (default: first configured)");
  simulate_cmd->add_option("--alpha", sim_alpha, "Misspecification exponent (default: first configured)");
  simulate_cmd->add_option("--n", sim_n, "Sample size (default: first configured)");
  auto* sweep_cmd = app.add_subcommand("sweep", "Full factorial over directions, alphas and sample sizes");
  add_common(sweep_cmd, sweep_opts);
  auto* check_cmd = app.add_subcommand("check", "Numerical invariant suite");
  add_common(check_cmd, check_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*analyze_cmd) return analyze(resolve(analyze_opts, analyze_cmd));
    if (*simulate_cmd) {
      return simulate(resolve(simulate_opts, simulate_cmd), sim_direction, sim_alpha, sim_n, simulate_opts.quiet);
    }
    if (*sweep_cmd) return run_sweep(resolve(sweep_opts, sweep_cmd), sweep_opts.quiet);
    if (*check_cmd) return check(resolve(check_opts, check_cmd));
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
