// Command-line front end: generate / run / sweep / oracle.
//
// Exit codes: 0 success, 1 configuration error, 2 solver failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "padmm/harness.hpp"

namespace fs = std::filesystem;
using namespace padmm;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kSolverFailure = 2;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
};

ExperimentConfig load(const Options& opt) {
  ExperimentConfig cfg = load_config(opt.config);
  if (opt.seed) cfg.seed = *opt.seed;
  return cfg;
}

void write(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

int cmd_generate(const Options& opt) {
  const ExperimentConfig cfg = load(opt);
  const Instance inst = build_instance(cfg);
  const fs::path dir(opt.out);
  fs::create_directories(dir);
  write_edge_list(inst.net, (dir / (cfg.name + "_graph.txt")).string());
  write(dir / (cfg.name + "_instance.txt"), serialize_instance(inst));
  std::cout << "wrote " << (dir / (cfg.name + "_graph.txt")).string() << " and "
            << (dir / (cfg.name + "_instance.txt")).string() << "\n";
  return kOk;
}

int cmd_run(const Options& opt) {
  const ExperimentConfig cfg = load(opt);
  const ExperimentResult res = run_experiment(cfg, fs::path(opt.out));
  std::cout << summary_csv(res);
  for (const AlgorithmOutcome& o : res.outcomes)
    if (o.failed) std::cerr << o.name << " failed: " << o.error << "\n";
  return res.any_failed() ? kSolverFailure : kOk;
}

int cmd_sweep(const Options& opt) {
  const ExperimentConfig cfg = load(opt);
  const std::vector<SweepResult> sweep = parameter_sweep(cfg);
  write(fs::path(opt.out) / (cfg.name + "_sweep.csv"), sweep_csv(sweep));
  for (const SweepResult& sr : sweep) {
    std::cout << sr.algorithm << ": ";
    if (sr.all_diverged) {
      std::cout << "no grid value reached " << cfg.sweep_target << "\n";
      continue;
    }
    const auto best = std::find_if(sr.points.begin(), sr.points.end(), [&](const SweepPoint& p) { return p.value == *sr.best; });
    std::cout << "best " << *sr.best << " (" << *best->cs << " CS)";
    if (sr.certified)
      std::cout << ", certified: both neighbors at -" << sr.precision_below << " / +" << sr.precision_above
                << " are worse";
    else
      std::cout << ", no precision certificate";
    std::cout << "\n";
  }
  return kOk;
}

int cmd_oracle(const Options& opt) {
  const ExperimentConfig cfg = load(opt);
  const Instance inst = build_instance(cfg);
  const Eigen::VectorXd x = reference_solution(inst);
  std::string text;
  char buf[40];
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g\n", x[i]);
    text += buf;
  }
  const fs::path path = fs::path(opt.out) / (cfg.name + "_reference.txt");
  write(path, text);
  std::cout << "wrote " << path.string() << " (" << x.size() << " values)\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Partial-variable distributed ADMM experiments"};
  app.require_subcommand(1);
  Options opt;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "experiment config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", opt.seed, "override the config's seed");
    sub->add_option("--out", opt.out, "output directory")->capture_default_str();
  };
  CLI::App* gen = app.add_subcommand("generate", "write the graph and serialized instance");
  CLI::App* run = app.add_subcommand("run", "run every configured algorithm and write CSV traces");
  CLI::App* sweep = app.add_subcommand("sweep", "grid search over rho (or L for nesterov)");
  CLI::App* oracle = app.add_subcommand("oracle", "write the centralized reference solution");
  for (CLI::App* sub : {gen, run, sweep, oracle}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (gen->parsed()) return cmd_generate(opt);
    if (run->parsed()) return cmd_run(opt);
    if (sweep->parsed()) return cmd_sweep(opt);
    return cmd_oracle(opt);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const GraphError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const SolverError& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kSolverFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSolverFailure;
  }
}
