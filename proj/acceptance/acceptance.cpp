// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Each criterion also has to finish inside its time limit.
//
// Usage: acceptance [criterion ...]   (default: all)

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include "fixtures.hpp"
#include "padmm/harness.hpp"
#include "padmm/projection.hpp"
#include "padmm/reference_admm.hpp"
#include "padmm/steiner.hpp"

using namespace padmm;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string cs_text(const std::optional<int>& cs) { return cs ? std::to_string(*cs) : "never"; }

// Fewer CS wins; a run that never reaches the threshold loses to one that does.
bool fewer(const std::optional<int>& a, const std::optional<int>& b) { return a && (!b || *a < *b); }

fs::path config_path(const std::string& file) { return fs::path(PADMM_CONFIG_DIR) / file; }

const AlgorithmOutcome& outcome(const ExperimentResult& r, const std::string& name) {
  for (const AlgorithmOutcome& o : r.outcomes)
    if (o.name == name) return o;
  throw std::runtime_error("config has no algorithm '" + name + "'");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------- 1

Verdict oracle_equivalence() {
  Rng rng(2024);
  const int instances = 8, iterations = 50;
  double worst_copy = 0, worst_dual = 0;
  for (int trial = 0; trial < instances; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_index(7));  // 2..8 nodes
    const Network net = fixtures::random_connected(n, 0.3, rng);
    const int comps = 1 + static_cast<int>(rng.uniform_index(6));
    std::vector<int> dims;
    if (trial % 2)
      for (int l = 0; l < comps; ++l) dims.push_back(1 + static_cast<int>(rng.uniform_index(3)));
    const ComponentMap cmap = fixtures::random_connected_cmap(net, comps, n, rng, dims);
    const ProblemSet probs = fixtures::random_quadratics(cmap, rng);
    const Coloring col = greedy_color(net);
    const double rho = 0.3 + 2.0 * rng.uniform01();
    EngineConfig cfg;
    cfg.rho = rho;
    ConsensusEngine engine(net, cmap, probs, cfg, Scheme::color_sweep, col);
    ExtendedAdmmReference ref(net, col, cmap, probs, rho);
    for (int k = 0; k < iterations; ++k) {
      engine.iterate();
      ref.iterate();
      worst_copy = std::max(worst_copy, (engine.state().x - ref.copies()).lpNorm<Eigen::Infinity>());
      for (const CopySlot& s : engine.layout().slots()) {
        Eigen::VectorXd gamma = Eigen::VectorXd::Zero(s.dim);
        for (int nb : s.neighbors) {
          const int j = engine.layout().slot(nb).node;
          gamma += (j > s.node ? 1.0 : -1.0) * ref.edge_dual(s.component, s.node, j);
        }
        worst_dual = std::max(worst_dual, (gamma - engine.state().gamma.segment(s.offset, s.dim)).lpNorm<Eigen::Infinity>());
      }
    }
  }
  return {worst_copy <= 1e-9 && worst_dual <= 1e-9,
          fmt("%d instances (<= 8 nodes) x %d iterations; max copy gap %.2e, max condensed-dual gap %.2e (tol 1e-9)",
              instances, iterations, worst_copy, worst_dual)};
}

// ---------------------------------------------------------------- 2

Verdict bipartite_convergence() {
  std::vector<std::pair<int, int>> e;
  for (int i = 0; i < 10; ++i) e.emplace_back(i, (i + 1) % 10);
  e.emplace_back(0, 5);
  e.emplace_back(2, 7);
  e.emplace_back(4, 9);
  const Network net = Network::from_edges(10, e);
  const Coloring col = greedy_color(net);
  Rng rng(10);
  const ComponentMap cmap = fixtures::random_connected_cmap(net, 15, 6, rng);
  const ProblemSet probs = fixtures::random_quadratics(cmap, rng, 1.0);
  const Eigen::VectorXd xstar = fixtures::dense_minimizer(cmap, probs);
  EngineConfig cfg;
  cfg.rho = 1.0;
  cfg.max_cs = 2000;
  cfg.tolerance = 0;
  cfg.target_error = 1e-8;
  const RunResult r = run_algorithm1(net, col, cmap, probs, cfg, xstar);
  const auto cs = r.trace.cs_to_error(1e-8);
  const double err = r.trace.records.back().relative_error;
  return {col.num_colors() == 2 && cs && err < 1e-8,
          fmt("%d colors; relative error %.2e after %d CS (needs < 1e-8 within 2000)", col.num_colors(), err,
              r.trace.records.back().cs)};
}

// ---------------------------------------------------------------- 3

Verdict block_structure() {
  Rng rng(3);
  int blocks = 0;
  bool ok = true;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_index(10));
    const Network net = fixtures::random_connected(n, 0.3, rng);
    const int comps = 1 + static_cast<int>(rng.uniform_index(5));
    std::vector<int> dims;
    for (int l = 0; l < comps; ++l) dims.push_back(1 + static_cast<int>(rng.uniform_index(3)));
    const ComponentMap cmap = fixtures::random_connected_cmap(net, comps, n, rng, dims);
    const Coloring col = greedy_color(net);
    ExtendedAdmmReference ref(net, col, cmap, fixtures::random_quadratics(cmap, rng), 1.0);
    for (int l = 0; l < comps; ++l) {
      const InducedSubgraph g = induced_subgraph(net, cmap, l);
      if (g.edges.empty()) continue;
      for (int c = 0; c < col.num_colors(); ++c) {
        const Eigen::MatrixXd gram = ref.block_gram(l, c);
        if (gram.size() == 0) continue;
        ++blocks;
        Eigen::MatrixXd off = gram;
        off.diagonal().setZero();
        ok = ok && off.lpNorm<Eigen::Infinity>() == 0.0 && gram.diagonal().minCoeff() > 0.0;
        // The diagonal holds each member's degree in G_l (one entry per scalar).
        int at = 0;
        for (int p : col.color_class(c)) {
          if (!g.contains(p)) continue;
          for (int i = 0; i < cmap.dim(l); ++i) ok = ok && gram(at + i, at + i) == g.degree_of(p);
          at += cmap.dim(l);
        }
      }
    }
  }
  return {ok, fmt("100 instances, %d per-color Gram blocks: all diagonal with entries D_{p,l} > 0", blocks)};
}

// ---------------------------------------------------------------- 4

Verdict flow_quadratic_ordering() {
  const ExperimentConfig cfg = load_config(config_path("flow_quadratic.cfg"));
  const ExperimentResult r = run_experiment(cfg);
  const auto& a1 = outcome(r, "alg1").trace;
  const auto& a2 = outcome(r, "alg2").trace;
  const auto& nv = outcome(r, "nesterov").trace;
  const auto& dd = outcome(r, "dadmm").trace;
  const auto c1 = a1.cs_to_error(1e-4), c2 = a2.cs_to_error(1e-4), cn = nv.cs_to_error(1e-4);
  const bool order = fewer(c1, c2) && fewer(c2, cn);

  // D-ADMM payload at 1e-2. If the run stopped first, every recorded error
  // is above 1e-2, so its payload at 1e-2 strictly exceeds the total sent.
  const auto p1 = a1.payload_to_error(1e-2);
  const auto pd = dd.payload_to_error(1e-2);
  std::string dtext;
  bool gap = false;
  if (p1 && pd) {
    gap = *pd > 10 * *p1;
    dtext = fmt("D-ADMM payload at 1e-2 = %lld", static_cast<long long>(*pd));
  } else if (p1 && !dd.records.empty() && !outcome(r, "dadmm").failed) {
    const std::int64_t sent = dd.records.back().payload_cumulative;
    gap = sent > 10 * *p1;
    dtext = fmt("D-ADMM still at error %.3f after %d CS, so its payload at 1e-2 > %lld", dd.records.back().relative_error,
                dd.records.back().cs, static_cast<long long>(sent));
  }
  return {order && gap,
          fmt("CS to 1e-4: alg1 %s < alg2 %s < nesterov %s; alg1 payload at 1e-2 = %lld, ", cs_text(c1).c_str(),
              cs_text(c2).c_str(), cs_text(cn).c_str(), static_cast<long long>(p1.value_or(-1))) +
              dtext + " (needs > 10x)"};
}

// ---------------------------------------------------------------- 5

Verdict flow_delay_ordering() {
  const ExperimentConfig cfg = load_config(config_path("flow_delay.cfg"));
  const ExperimentResult r = run_experiment(cfg);
  const auto c1 = outcome(r, "alg1").trace.cs_to_error(1e-3);
  const auto c2 = outcome(r, "alg2").trace.cs_to_error(1e-3);
  const auto& nv = outcome(r, "nesterov").trace;
  const auto cn = nv.cs_to_error(1e-3);
  std::string ntext = cs_text(cn);
  if (!cn && !nv.records.empty())
    ntext += fmt(" (error %.2e after %d CS, L = 15000)", nv.records.back().relative_error, nv.records.back().cs);
  return {fewer(c1, c2) && fewer(c1, cn) && fewer(c2, cn),
          "CS to 1e-3: alg1 " + cs_text(c1) + " < alg2 " + cs_text(c2) + "; nesterov " + ntext};
}

// ---------------------------------------------------------------- 6, 7

struct SweepSummary {
  std::optional<double> rho;
  std::optional<int> cs;
  bool certified = false;
};

SweepSummary best_of(const std::vector<SweepResult>& sweep, const std::string& name) {
  for (const SweepResult& sr : sweep) {
    if (sr.algorithm != name || !sr.best) continue;
    for (const SweepPoint& p : sr.points)
      if (p.value == *sr.best) return {p.value, p.cs, sr.certified};
  }
  return {};
}

std::string sweep_text(const std::string& name, const SweepSummary& s) {
  if (!s.rho) return name + " never reached 1e-4";
  return fmt("%s %d CS (rho %g%s)", name.c_str(), *s.cs, *s.rho, s.certified ? ", certified" : "");
}

Verdict mpc_connected_ordering() {
  std::string detail;
  bool ok = true;
  for (const char* file : {"mpc_star.cfg", "mpc_generic.cfg"}) {
    const ExperimentConfig cfg = load_config(config_path(file));
    const Instance inst = build_instance(cfg);
    for (int l = 0; l < inst.cmap.n_components(); ++l) ok = ok && is_connected(induced_subgraph(inst.net, inst.cmap, l));
    const auto sweep = parameter_sweep(cfg);
    const SweepSummary s1 = best_of(sweep, "alg1"), s2 = best_of(sweep, "alg2");
    ok = ok && s1.cs && fewer(s1.cs, s2.cs);
    detail += std::string(detail.empty() ? "" : "; ") + to_string(cfg.problem.pattern) + ": " +
              sweep_text("alg1", s1) + " vs " + sweep_text("alg2", s2);
  }
  return {ok, "P=50, stable, best CS to 1e-4 over rho in 5:5:100; " + detail};
}

Verdict mpc_nonconnected() {
  const ExperimentConfig cfg = load_config(config_path("mpc_nonconnected.cfg"));
  const Instance inst = build_instance(cfg);
  int disconnected = 0;
  for (int l = 0; l < inst.cmap.n_components(); ++l)
    disconnected += !is_connected(induced_subgraph(inst.net, inst.cmap, l));
  const ComponentMap aug = steiner_preprocess(inst.net, inst.cmap);
  bool all_connected = true;
  for (int l = 0; l < aug.n_components(); ++l) all_connected = all_connected && is_connected(augmented_subgraph(inst.net, aug, l));

  const auto sweep = parameter_sweep(cfg);
  const SweepSummary s3 = best_of(sweep, "alg3"), s2 = best_of(sweep, "alg2_generalized");

  // Convergence to the centralized solution at the swept rho.
  double final_error = 1;
  if (s3.rho) {
    ExperimentConfig run_cfg = cfg;
    run_cfg.target_error = 1e-7;
    run_cfg.max_cs = 5000;
    AlgorithmSpec spec{"alg3", AlgorithmKind::alg3, *s3.rho, 0, std::nullopt};
    const AlgorithmOutcome o = run_one(inst, spec, run_cfg, reference_solution(inst));
    if (!o.failed && !o.trace.records.empty()) final_error = o.trace.records.back().relative_error;
  }
  return {disconnected > 0 && all_connected && final_error < 1e-6 && fewer(s3.cs, s2.cs),
          fmt("%d of %d components non-connected, all augmented subgraphs connected: %s; alg3 final error %.2e; ",
              disconnected, inst.cmap.n_components(), all_connected ? "yes" : "no", final_error) +
              "CS to 1e-4: " + sweep_text("alg3", s3) + " vs " + sweep_text("alg2_generalized", s2)};
}

// ---------------------------------------------------------------- 8

Verdict projection_oracle() {
  Rng rng(8);
  double worst = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_index(8));
    Eigen::VectorXd y0(n), b(n), lo(n), hi(n);
    for (int i = 0; i < n; ++i) {
      y0[i] = 4.0 * rng.normal();
      b[i] = (rng.uniform01() < 0.5 ? -1.0 : 1.0) * (0.2 + 2.0 * rng.uniform01());
      lo[i] = -3.0 * rng.uniform01();
      hi[i] = lo[i] + (rng.uniform01() < 0.1 ? 0.0 : 4.0 * rng.uniform01());
    }
    double hmin = 0, hmax = 0;
    for (int i = 0; i < n; ++i) {
      hmin += std::min(b[i] * lo[i], b[i] * hi[i]);
      hmax += std::max(b[i] * lo[i], b[i] * hi[i]);
    }
    const double d = hmin + rng.uniform01() * (hmax - hmin);
    const Eigen::VectorXd got = project_box_hyperplane(y0, b, d, lo, hi);
    const Eigen::VectorXd want = fixtures::brute_force_projection(y0, b, d, lo, hi);
    worst = std::max(worst, (got - want).lpNorm<Eigen::Infinity>());
  }
  return {worst <= 1e-8, fmt("1000 projections, max deviation from the active-set enumeration %.2e (tol 1e-8)", worst)};
}

// ---------------------------------------------------------------- 9

Verdict condensation_oracle() {
  Rng rng(9);
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int P = 2 + static_cast<int>(rng.uniform_index(7));
    const Network net = fixtures::random_connected(P, 0.3, rng);
    const auto pattern = static_cast<CouplingPattern>(rng.uniform_index(3));
    const MpcSystem sys = fixtures::random_mpc_system(net, pattern, rng, 1 + static_cast<int>(rng.uniform_index(6)));
    const CondensedMpc c = condense(sys);
    Eigen::VectorXd u(c.cmap.total_dim());
    for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = rng.normal();
    const double oracle = fixtures::mpc_rollout_cost(sys, u);
    worst = std::max(worst, std::abs(c.objective(u) - oracle) / std::abs(oracle));
  }
  return {worst <= 1e-9, fmt("100 instances, max relative gap to the state rollout %.2e (tol 1e-9)", worst)};
}

// ---------------------------------------------------------------- 10

Verdict steiner_bound() {
  Rng rng(10);
  double worst_ratio = 0;
  int trees = 0;
  bool valid = true;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 3 + static_cast<int>(rng.uniform_index(10));  // 3..12 nodes
    const Network net = fixtures::random_connected(n, 0.15, rng);
    std::vector<int> required;
    for (int p = 0; p < n; ++p)
      if (rng.uniform01() < 0.35) required.push_back(p);
    if (required.size() < 2) required = {0, n - 1};
    const SteinerTree tree = steiner_augment(net, required);
    const int opt = fixtures::brute_force_steiner_edges(net, required);
    // Tree check: spans the required nodes, |E| = |V| - 1, connected.
    const InducedSubgraph sub = restrict_to(net, tree.nodes, tree.edges);
    valid = valid && tree.edges.size() + 1 == tree.nodes.size() && is_connected(sub);
    for (int r : required) valid = valid && std::binary_search(tree.nodes.begin(), tree.nodes.end(), r);
    const double ratio = opt == 0 ? 1.0 : static_cast<double>(tree.edges.size()) / opt;
    worst_ratio = std::max(worst_ratio, ratio);
    ++trees;
  }
  return {valid && worst_ratio <= 2.0,
          fmt("%d instances (<= 12 nodes), valid trees: %s, worst heuristic/optimum edge ratio %.3f (bound 2)", trees,
              valid ? "yes" : "no", worst_ratio)};
}

// ---------------------------------------------------------------- 11

Verdict determinism() {
  const ExperimentConfig cfg = load_config(config_path("flow_quadratic.cfg"));
  const fs::path base = fs::temp_directory_path() / "padmm_acceptance_determinism";
  fs::remove_all(base);
  run_experiment(cfg, base / "a");
  run_experiment(cfg, base / "b");
  int files = 0, identical = 0;
  for (const auto& entry : fs::directory_iterator(base / "a")) {
    ++files;
    identical += slurp(entry.path()) == slurp(base / "b" / entry.path().filename());
  }
  const bool ok = files == static_cast<int>(cfg.algorithms.size()) + 1 && identical == files;
  fs::remove_all(base);
  return {ok, fmt("two runs of the criterion-4 config: %d of %d CSV files byte-identical", identical, files)};
}

struct Criterion {
  int id;
  const char* title;
  double limit_seconds;
  std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "oracle equivalence", 10, oracle_equivalence},
      {2, "bipartite convergence", 5, bipartite_convergence},
      {3, "per-color block structure", 5, block_structure},
      {4, "quadratic flow ordering and payload", 60, flow_quadratic_ordering},
      {5, "delay flow ordering", 300, flow_delay_ordering},
      {6, "connected MPC ordering", 300, mpc_connected_ordering},
      {7, "non-connected MPC", 300, mpc_nonconnected},
      {8, "projection oracle", 10, projection_oracle},
      {9, "condensation oracle", 10, condensation_oracle},
      {10, "Steiner heuristic bound", 30, steiner_bound},
      {11, "CSV determinism", 120, determinism},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const Criterion& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.limit_seconds;
    const bool pass = v.pass && in_time;
    failures += !pass;
    std::printf("criterion %2d %s  [%.2fs / %.0fs%s] %s: %s\n", c.id, pass ? "PASS" : "FAIL", secs, c.limit_seconds,
                in_time ? "" : ", over time", c.title, v.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
