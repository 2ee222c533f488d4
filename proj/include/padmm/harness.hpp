#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "padmm/engine.hpp"
#include "padmm/graph.hpp"
#include "padmm/mpc.hpp"
#include "padmm/netflow.hpp"

namespace padmm {

/// Malformed or incomplete experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class AlgorithmKind {
  alg1,              // color sweep on the original map
  alg2,              // parallel 2-block scheme on the original map
  alg3,              // Steiner preprocessing + color sweep
  alg2_generalized,  // Steiner preprocessing + parallel scheme
  dadmm,             // color sweep with every node owning every component
  nesterov           // accelerated dual gradient (flow problems only)
};
const char* to_string(AlgorithmKind k);
AlgorithmKind parse_algorithm_kind(const std::string& s);

struct AlgorithmSpec {
  std::string name;
  AlgorithmKind kind = AlgorithmKind::alg1;
  double rho = 0;        // required for the ADMM variants
  double lipschitz = 0;  // nesterov; 0 = exact (quadratic flows only)
  std::optional<int> max_cs;
};

struct GraphSpec {
  std::string source = "barabasi_albert";  // or "file"
  int nodes = 0;
  int attach = 2;
  std::string path;
  std::optional<std::uint64_t> seed;
};

struct ProblemSpec {
  std::string family;  // "flow" or "mpc"
  FlowKind flow_kind = FlowKind::quadratic;
  int injections = 0;
  double inner_tolerance = 1e-10;
  CouplingPattern pattern = CouplingPattern::star;
  int reach = 3;
  Stability stability = Stability::stable;
  MpcDims dims;
  std::optional<std::uint64_t> seed;
};

/// Grammar: one "key = value" per line; '#' starts a comment; "[graph]",
/// "[problem]", "[run]", "[sweep]" and "[algorithm NAME]" open sections.
/// Keys before the first section are global ("name", "seed").
///
///   name = fig5a
///   seed = 1
///   [graph]      source = barabasi_albert | file, nodes, attach, path, seed
///   [problem]    family = flow | mpc, seed
///                flow: kind = quadratic | delay, injections, inner_tolerance
///                mpc:  pattern = star | generic | nonconnected, reach,
///                      stability = stable | unstable, state_dim, input_dim, horizon
///   [run]        max_cs, tolerance, target_error, divergence, threads,
///                reference = centralized | none
///   [algorithm N] type (defaults to N), rho, lipschitz, max_cs
///   [sweep]      target, and one grid per algorithm name:
///                "N = 1, 2, 5" or "N = start:step:stop"
///
/// Graph and problem seeds default to seed and seed + 1.
struct ExperimentConfig {
  std::string name;
  std::uint64_t seed = 0;
  GraphSpec graph;
  ProblemSpec problem;
  std::vector<AlgorithmSpec> algorithms;
  int max_cs = 1000;
  double tolerance = 1e-10;
  double target_error = 0;
  double divergence_threshold = 1e6;
  int threads = 1;
  bool use_reference = true;
  double sweep_target = 1e-4;
  std::map<std::string, std::vector<double>> sweep_grid;

  std::uint64_t graph_seed() const { return graph.seed.value_or(seed); }
  std::uint64_t problem_seed() const { return problem.seed.value_or(seed + 1); }
  /// Throws ConfigError for missing or inconsistent parameters.
  void validate() const;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// A generated problem ready to run.
struct Instance {
  Network net;
  Coloring coloring;
  ComponentMap cmap;
  ProblemSet problems;
  std::optional<FlowInstance> flow;
  std::optional<CondensedMpc> mpc;
  std::optional<MpcSystem> mpc_system;
};

Instance build_instance(const ExperimentConfig& cfg);

/// Serialized problem data (flow or MPC text format).
std::string serialize_instance(const Instance& inst);

/// Centralized optimum of the instance.
Eigen::VectorXd reference_solution(const Instance& inst);

struct AlgorithmOutcome {
  std::string name;
  AlgorithmKind kind = AlgorithmKind::alg1;
  RunTrace trace;
  bool failed = false;
  std::string error;
};

AlgorithmOutcome run_one(const Instance& inst, const AlgorithmSpec& spec, const ExperimentConfig& cfg,
                         const std::optional<Eigen::VectorXd>& reference);

struct ExperimentResult {
  std::vector<AlgorithmOutcome> outcomes;
  std::optional<Eigen::VectorXd> reference;
  bool any_failed() const;
};

inline const std::vector<double> kSummaryThresholds{1e-1, 1e-2, 1e-3, 1e-4};

/// Runs every configured algorithm. Solver failures are recorded in the
/// outcome and the remaining algorithms still run. With `out_dir`, writes
/// <out>/<name>_<algorithm>.csv and <out>/<name>_summary.csv.
ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// "algorithm,cs,relative_error,payload_cumulative", 17 significant digits.
std::string trace_csv(const std::string& algorithm, const RunTrace& trace);

/// One line per algorithm: status and CS/payload to each summary threshold
/// ("NA" when not reached).
std::string summary_csv(const ExperimentResult& result);

struct SweepPoint {
  double value = 0;
  std::optional<int> cs;  // CS to the sweep target; empty when not reached
  RunStatus status = RunStatus::max_steps;
  bool failed = false;
};

struct SweepResult {
  std::string algorithm;
  std::vector<SweepPoint> points;  // grid order
  std::optional<double> best;      // empty when no point reached the target
  bool all_diverged = false;       // no point reached the target
  /// Both grid neighbors of the best point exist and need strictly more
  /// CS (or never reach the target).
  bool certified = false;
  double precision_below = 0;  // distance to the lower neighbor
  double precision_above = 0;
};

/// For every algorithm with a grid in cfg.sweep_grid, runs the grid and
/// picks the value with the fewest CS to cfg.sweep_target (ties go to the
/// first grid value). The grid parameter is rho, or the Lipschitz
/// constant for nesterov.
std::vector<SweepResult> parameter_sweep(const ExperimentConfig& cfg);

std::string sweep_csv(const std::vector<SweepResult>& sweep);

}  // namespace padmm
