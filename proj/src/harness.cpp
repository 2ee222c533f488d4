#include "padmm/harness.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "padmm/rng.hpp"
#include "padmm/steiner.hpp"

namespace padmm {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

[[noreturn]] void fail(int line, const std::string& what) {
  throw ConfigError("config line " + std::to_string(line) + ": " + what);
}

template <class T>
T parse_integer(const std::string& v, int line, const std::string& key) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) fail(line, "'" + key + "' expects an integer, got '" + v + "'");
  return out;
}

double parse_real(const std::string& v, int line, const std::string& key) {
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(out))
    fail(line, "'" + key + "' expects a finite number, got '" + v + "'");
  return out;
}

std::vector<double> parse_grid(const std::string& v, int line, const std::string& key) {
  std::vector<double> grid;
  if (v.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(v);
    for (std::string part; std::getline(ss, part, ':');) parts.push_back(trim(part));
    if (parts.size() != 3) fail(line, "grid range must be start:step:stop");
    const double start = parse_real(parts[0], line, key), step = parse_real(parts[1], line, key),
                 stop = parse_real(parts[2], line, key);
    if (!(step > 0) || stop < start) fail(line, "grid range needs step > 0 and stop >= start");
    const auto count = static_cast<long>(std::floor((stop - start) / step + 1e-9)) + 1;
    if (count > 100000) fail(line, "grid range is too long");
    for (long i = 0; i < count; ++i) grid.push_back(start + static_cast<double>(i) * step);
  } else {
    std::stringstream ss(v);
    for (std::string part; std::getline(ss, part, ',');) grid.push_back(parse_real(trim(part), line, key));
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  if (grid.empty()) fail(line, "empty grid");
  return grid;
}

bool is_admm(AlgorithmKind k) { return k != AlgorithmKind::nesterov; }

const char* status_name(const AlgorithmOutcome& o) { return o.failed ? "failed" : to_string(o.trace.status); }

const char* threshold_label(double t) {
  if (t == 1e-1) return "1e-1";
  if (t == 1e-2) return "1e-2";
  if (t == 1e-3) return "1e-3";
  return "1e-4";
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace

const char* to_string(AlgorithmKind k) {
  switch (k) {
    case AlgorithmKind::alg1: return "alg1";
    case AlgorithmKind::alg2: return "alg2";
    case AlgorithmKind::alg3: return "alg3";
    case AlgorithmKind::alg2_generalized: return "alg2_generalized";
    case AlgorithmKind::dadmm: return "dadmm";
    case AlgorithmKind::nesterov: return "nesterov";
  }
  return "?";
}

AlgorithmKind parse_algorithm_kind(const std::string& s) {
  for (auto k : {AlgorithmKind::alg1, AlgorithmKind::alg2, AlgorithmKind::alg3, AlgorithmKind::alg2_generalized,
                 AlgorithmKind::dadmm, AlgorithmKind::nesterov})
    if (s == to_string(k)) return k;
  throw ConfigError("unknown algorithm type '" + s + "'");
}

// ---------------------------------------------------------------- config

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::string section;
  std::set<std::string> seen;  // "section.key", for duplicate detection
  std::vector<bool> type_given;
  bool seed_given = false;
  std::istringstream in(text);
  int lineno = 0;
  for (std::string raw; std::getline(in, raw);) {
    ++lineno;
    const std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(lineno, "unterminated section header");
      std::istringstream hs(line.substr(1, line.size() - 2));
      std::vector<std::string> words;
      for (std::string w; hs >> w;) words.push_back(w);
      if (words.size() == 2 && words[0] == "algorithm") {
        for (const auto& a : cfg.algorithms)
          if (a.name == words[1]) fail(lineno, "duplicate algorithm '" + words[1] + "'");
        AlgorithmSpec spec;
        spec.name = words[1];
        cfg.algorithms.push_back(spec);
        type_given.push_back(false);
        section = "algorithm " + words[1];
      } else if (words.size() == 1 &&
                 (words[0] == "graph" || words[0] == "problem" || words[0] == "run" || words[0] == "sweep")) {
        section = words[0];
      } else {
        fail(lineno, "unknown section '" + line + "'");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(lineno, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) fail(lineno, "empty key or value");
    if (!seen.insert(section + "." + key).second) fail(lineno, "duplicate key '" + key + "'");
    auto unknown = [&] { fail(lineno, "unknown key '" + key + "'" + (section.empty() ? "" : " in [" + section + "]")); };

    if (section.empty()) {
      if (key == "name") {
        cfg.name = value;
      } else if (key == "seed") {
        cfg.seed = parse_integer<std::uint64_t>(value, lineno, key);
        seed_given = true;
      } else {
        unknown();
      }
    } else if (section == "graph") {
      if (key == "source") cfg.graph.source = value;
      else if (key == "nodes") cfg.graph.nodes = parse_integer<int>(value, lineno, key);
      else if (key == "attach") cfg.graph.attach = parse_integer<int>(value, lineno, key);
      else if (key == "path") cfg.graph.path = value;
      else if (key == "seed") cfg.graph.seed = parse_integer<std::uint64_t>(value, lineno, key);
      else unknown();
    } else if (section == "problem") {
      try {
        if (key == "family") cfg.problem.family = value;
        else if (key == "kind") cfg.problem.flow_kind = parse_flow_kind(value);
        else if (key == "injections") cfg.problem.injections = parse_integer<int>(value, lineno, key);
        else if (key == "inner_tolerance") cfg.problem.inner_tolerance = parse_real(value, lineno, key);
        else if (key == "pattern") cfg.problem.pattern = parse_coupling_pattern(value);
        else if (key == "reach") cfg.problem.reach = parse_integer<int>(value, lineno, key);
        else if (key == "stability") cfg.problem.stability = parse_stability(value);
        else if (key == "state_dim") cfg.problem.dims.state = parse_integer<int>(value, lineno, key);
        else if (key == "input_dim") cfg.problem.dims.input = parse_integer<int>(value, lineno, key);
        else if (key == "horizon") cfg.problem.dims.horizon = parse_integer<int>(value, lineno, key);
        else if (key == "seed") cfg.problem.seed = parse_integer<std::uint64_t>(value, lineno, key);
        else unknown();
      } catch (const std::invalid_argument& e) {
        fail(lineno, e.what());
      }
    } else if (section == "run") {
      if (key == "max_cs") cfg.max_cs = parse_integer<int>(value, lineno, key);
      else if (key == "tolerance") cfg.tolerance = parse_real(value, lineno, key);
      else if (key == "target_error") cfg.target_error = parse_real(value, lineno, key);
      else if (key == "divergence") cfg.divergence_threshold = parse_real(value, lineno, key);
      else if (key == "threads") cfg.threads = parse_integer<int>(value, lineno, key);
      else if (key == "reference") {
        if (value == "centralized") cfg.use_reference = true;
        else if (value == "none") cfg.use_reference = false;
        else fail(lineno, "reference must be 'centralized' or 'none'");
      } else unknown();
    } else if (section == "sweep") {
      if (key == "target") cfg.sweep_target = parse_real(value, lineno, key);
      else cfg.sweep_grid[key] = parse_grid(value, lineno, key);
    } else {
      AlgorithmSpec& a = cfg.algorithms.back();
      if (key == "type") {
        try {
          a.kind = parse_algorithm_kind(value);
        } catch (const ConfigError& e) {
          fail(lineno, e.what());
        }
        type_given.back() = true;
      } else if (key == "rho") a.rho = parse_real(value, lineno, key);
      else if (key == "lipschitz") a.lipschitz = parse_real(value, lineno, key);
      else if (key == "max_cs") a.max_cs = parse_integer<int>(value, lineno, key);
      else unknown();
    }
  }
  if (!seed_given) throw ConfigError("config: 'seed' is mandatory");
  for (std::size_t i = 0; i < cfg.algorithms.size(); ++i)
    if (!type_given[i]) {
      try {
        cfg.algorithms[i].kind = parse_algorithm_kind(cfg.algorithms[i].name);
      } catch (const ConfigError&) {
        throw ConfigError("config: algorithm '" + cfg.algorithms[i].name + "' needs a 'type'");
      }
    }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void ExperimentConfig::validate() const {
  auto check = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("config: " + what);
  };
  check(!name.empty(), "'name' is mandatory");
  check(std::all_of(name.begin(), name.end(),
                    [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.'; }),
        "'name' may only use letters, digits, '_', '-' and '.'");
  if (graph.source == "barabasi_albert") {
    check(graph.attach >= 1 && graph.nodes > graph.attach, "barabasi_albert needs nodes > attach >= 1");
  } else if (graph.source == "file") {
    check(!graph.path.empty(), "graph source 'file' needs 'path'");
  } else {
    check(false, "graph source must be 'barabasi_albert' or 'file'");
  }
  if (problem.family == "flow") {
    check(problem.injections >= 0, "injections must be nonnegative");
    check(problem.inner_tolerance > 0, "inner_tolerance must be positive");
  } else if (problem.family == "mpc") {
    check(problem.dims.state > 0 && problem.dims.input > 0 && problem.dims.horizon > 0,
          "MPC dimensions must be positive");
    check(problem.reach >= 0, "reach must be nonnegative");
  } else {
    check(false, "problem family must be 'flow' or 'mpc'");
  }
  check(!algorithms.empty(), "at least one [algorithm] section is required");
  for (const AlgorithmSpec& a : algorithms) {
    const std::string at = " for algorithm '" + a.name + "'";
    check(std::all_of(a.name.begin(), a.name.end(),
                      [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'; }),
          "algorithm names may only use letters, digits, '_' and '-'");
    if (is_admm(a.kind)) {
      check(a.rho > 0 || sweep_grid.count(a.name), "'rho' > 0 is required" + at);
    } else {
      check(problem.family == "flow", "nesterov is only available for flow problems");
      check(a.lipschitz >= 0, "'lipschitz' must be nonnegative" + at);
      check(a.lipschitz > 0 || problem.flow_kind == FlowKind::quadratic || sweep_grid.count(a.name),
            "'lipschitz' is required on delay instances" + at);
    }
    check(!a.max_cs || *a.max_cs >= 1, "'max_cs' must be at least 1" + at);
  }
  check(max_cs >= 1, "max_cs must be at least 1");
  check(tolerance >= 0 && target_error >= 0 && divergence_threshold > 0, "run tolerances must be nonnegative");
  check(threads >= 1, "threads must be at least 1");
  check(sweep_target > 0, "sweep target must be positive");
  for (const auto& [alg, grid] : sweep_grid) {
    check(std::any_of(algorithms.begin(), algorithms.end(), [&](const AlgorithmSpec& a) { return a.name == alg; }),
          "sweep grid for unknown algorithm '" + alg + "'");
    for (double v : grid) check(v > 0, "sweep grid values must be positive");
  }
}

// ---------------------------------------------------------------- instances

Instance build_instance(const ExperimentConfig& cfg) {
  cfg.validate();
  Network net = cfg.graph.source == "file"
                    ? load_edge_list(cfg.graph.path)
                    : generate_barabasi_albert(cfg.graph.nodes, cfg.graph.attach, cfg.graph_seed());
  Coloring coloring = greedy_color(net);
  if (cfg.problem.family == "flow") {
    FlowInstance flow = generate_flow_instance(net, cfg.problem.injections, cfg.problem_seed(), cfg.problem.flow_kind);
    ComponentMap cmap = flow.component_map();
    ProblemSet problems = make_flow_problems(flow, cfg.problem.inner_tolerance);
    return Instance{std::move(net), std::move(coloring), std::move(cmap), std::move(problems), std::move(flow), {}, {}};
  }
  Rng rng(cfg.problem_seed());
  const std::uint64_t coupling_seed = rng.next_u64(), system_seed = rng.next_u64();
  const Couplings omega = generate_couplings(net, cfg.problem.pattern, cfg.problem.reach, coupling_seed);
  MpcSystem sys = generate_systems(net, omega, cfg.problem.stability, cfg.problem.dims, system_seed);
  CondensedMpc mpc = condense(sys);
  ComponentMap cmap = mpc.cmap;
  ProblemSet problems = make_mpc_problems(mpc);
  return Instance{std::move(net), std::move(coloring), std::move(cmap), std::move(problems), {}, std::move(mpc),
                  std::move(sys)};
}

std::string serialize_instance(const Instance& inst) {
  if (inst.flow) return serialize(*inst.flow);
  return serialize(*inst.mpc_system);
}

Eigen::VectorXd reference_solution(const Instance& inst) {
  if (inst.flow) return centralized_flow_reference(*inst.flow);
  return centralized_mpc_reference(*inst.mpc);
}

// ---------------------------------------------------------------- runs

AlgorithmOutcome run_one(const Instance& inst, const AlgorithmSpec& spec, const ExperimentConfig& cfg,
                         const std::optional<Eigen::VectorXd>& reference) {
  AlgorithmOutcome out;
  out.name = spec.name;
  out.kind = spec.kind;
  try {
    if (spec.kind == AlgorithmKind::nesterov) {
      if (!inst.flow) throw ConfigError("nesterov is only available for flow problems");
      NesterovConfig nc;
      nc.lipschitz = spec.lipschitz;
      nc.max_cs = spec.max_cs.value_or(cfg.max_cs);
      nc.target_error = cfg.target_error;
      nc.divergence_threshold = cfg.divergence_threshold;
      out.trace = nesterov_dual_baseline(*inst.flow, nc, reference);
      return out;
    }
    EngineConfig ec;
    ec.rho = spec.rho;
    ec.max_cs = spec.max_cs.value_or(cfg.max_cs);
    ec.tolerance = cfg.tolerance;
    ec.target_error = cfg.target_error;
    ec.divergence_threshold = cfg.divergence_threshold;
    ec.threads = cfg.threads;
    switch (spec.kind) {
      case AlgorithmKind::alg1:
        out.trace = run_algorithm1(inst.net, inst.coloring, inst.cmap, inst.problems, ec, reference).trace;
        break;
      case AlgorithmKind::alg2:
        out.trace = run_algorithm2(inst.net, inst.cmap, inst.problems, ec, reference).trace;
        break;
      case AlgorithmKind::alg3:
        out.trace = run_algorithm3(inst.net, inst.coloring, inst.cmap, inst.problems, ec, reference).trace;
        break;
      case AlgorithmKind::alg2_generalized:
        out.trace =
            run_algorithm2(inst.net, steiner_preprocess(inst.net, inst.cmap), inst.problems, ec, reference).trace;
        break;
      case AlgorithmKind::dadmm: {
        std::vector<int> dims(inst.cmap.n_components());
        for (int l = 0; l < inst.cmap.n_components(); ++l) dims[l] = inst.cmap.dim(l);
        const ComponentMap global = ComponentMap::global(inst.net.node_count(), inst.cmap.n_components(), dims);
        out.trace = run_algorithm1(inst.net, inst.coloring, global, inst.problems, ec, reference).trace;
        break;
      }
      case AlgorithmKind::nesterov: break;
    }
  } catch (const SolverError& e) {
    out.failed = true;
    out.error = e.what();
  } catch (const GraphError& e) {
    out.failed = true;
    out.error = e.what();
  } catch (const std::invalid_argument& e) {
    out.failed = true;
    out.error = e.what();
  }
  return out;
}

bool ExperimentResult::any_failed() const {
  return std::any_of(outcomes.begin(), outcomes.end(), [](const AlgorithmOutcome& o) { return o.failed; });
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::optional<std::filesystem::path>& out_dir) {
  const Instance inst = build_instance(cfg);
  ExperimentResult result;
  if (cfg.use_reference) result.reference = reference_solution(inst);
  for (const AlgorithmSpec& spec : cfg.algorithms) result.outcomes.push_back(run_one(inst, spec, cfg, result.reference));
  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    for (const AlgorithmOutcome& o : result.outcomes)
      write_file(*out_dir / (cfg.name + "_" + o.name + ".csv"), trace_csv(o.name, o.trace));
    write_file(*out_dir / (cfg.name + "_summary.csv"), summary_csv(result));
  }
  return result;
}

std::string trace_csv(const std::string& algorithm, const RunTrace& trace) {
  std::string out = "algorithm,cs,relative_error,payload_cumulative\n";
  for (const TraceRecord& r : trace.records)
    out += algorithm + "," + std::to_string(r.cs) + "," + fmt17(r.relative_error) + "," +
           std::to_string(r.payload_cumulative) + "\n";
  return out;
}

std::string summary_csv(const ExperimentResult& result) {
  std::string out = "algorithm,type,status,cs_final,error_final";
  for (double t : kSummaryThresholds) out += std::string(",cs_to_") + threshold_label(t);
  for (double t : kSummaryThresholds) out += std::string(",payload_to_") + threshold_label(t);
  out += "\n";
  for (const AlgorithmOutcome& o : result.outcomes) {
    out += o.name + "," + to_string(o.kind) + "," + status_name(o);
    if (o.trace.records.empty()) {
      out += ",0,NA";
    } else {
      out += "," + std::to_string(o.trace.records.back().cs) + "," + fmt17(o.trace.records.back().relative_error);
    }
    for (double t : kSummaryThresholds) {
      const auto cs = o.trace.cs_to_error(t);
      out += "," + (cs ? std::to_string(*cs) : std::string("NA"));
    }
    for (double t : kSummaryThresholds) {
      const auto pl = o.trace.payload_to_error(t);
      out += "," + (pl ? std::to_string(*pl) : std::string("NA"));
    }
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------- sweep

std::vector<SweepResult> parameter_sweep(const ExperimentConfig& cfg) {
  if (!cfg.use_reference) throw ConfigError("a parameter sweep needs reference = centralized");
  if (cfg.sweep_grid.empty()) throw ConfigError("config has no [sweep] grid");
  const Instance inst = build_instance(cfg);
  const std::optional<Eigen::VectorXd> reference = reference_solution(inst);
  ExperimentConfig run_cfg = cfg;
  run_cfg.target_error = cfg.sweep_target;

  std::vector<SweepResult> out;
  for (const AlgorithmSpec& base : cfg.algorithms) {
    const auto grid = cfg.sweep_grid.find(base.name);
    if (grid == cfg.sweep_grid.end()) continue;
    SweepResult sr;
    sr.algorithm = base.name;
    for (double value : grid->second) {
      AlgorithmSpec spec = base;
      (spec.kind == AlgorithmKind::nesterov ? spec.lipschitz : spec.rho) = value;
      const AlgorithmOutcome o = run_one(inst, spec, run_cfg, reference);
      SweepPoint pt;
      pt.value = value;
      pt.failed = o.failed;
      pt.status = o.trace.status;
      if (!o.failed) pt.cs = o.trace.cs_to_error(cfg.sweep_target);
      sr.points.push_back(pt);
    }
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < sr.points.size(); ++i)
      if (sr.points[i].cs && (!best || *sr.points[i].cs < *sr.points[*best].cs)) best = i;
    sr.all_diverged = !best;
    if (best) {
      const std::size_t b = *best;
      sr.best = sr.points[b].value;
      auto worse = [&](std::size_t i) { return !sr.points[i].cs || *sr.points[i].cs > *sr.points[b].cs; };
      if (b > 0 && b + 1 < sr.points.size() && worse(b - 1) && worse(b + 1)) {
        sr.certified = true;
        sr.precision_below = sr.points[b].value - sr.points[b - 1].value;
        sr.precision_above = sr.points[b + 1].value - sr.points[b].value;
      }
    }
    out.push_back(std::move(sr));
  }
  return out;
}

std::string sweep_csv(const std::vector<SweepResult>& sweep) {
  std::string out = "algorithm,value,cs_to_target,status\n";
  for (const SweepResult& sr : sweep)
    for (const SweepPoint& p : sr.points)
      out += sr.algorithm + "," + fmt17(p.value) + "," + (p.cs ? std::to_string(*p.cs) : std::string("NA")) + "," +
             (p.failed ? "failed" : to_string(p.status)) + "\n";
  return out;
}

}  // namespace padmm
