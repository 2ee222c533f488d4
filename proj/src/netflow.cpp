#include "padmm/netflow.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <queue>
#include <sstream>

#include <Eigen/SparseCholesky>

#include "padmm/projection.hpp"
#include "padmm/rng.hpp"

namespace padmm {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Grounded (node 0 removed) weighted Laplacian sum_a w_a (e_t - e_h)(e_t - e_h)' + delta I.
Eigen::SparseMatrix<double> grounded_laplacian(const FlowInstance& inst, const Eigen::VectorXd& arc_weight,
                                               double delta) {
  const int n = inst.node_count - 1;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(inst.arcs.size() * 4 + n);
  for (std::size_t a = 0; a < inst.arcs.size(); ++a) {
    const double w = arc_weight[static_cast<Eigen::Index>(a)];
    if (w == 0.0) continue;
    const int t = inst.arcs[a].tail - 1, h = inst.arcs[a].head - 1;
    if (t >= 0) trip.emplace_back(t, t, w);
    if (h >= 0) trip.emplace_back(h, h, w);
    if (t >= 0 && h >= 0) {
      trip.emplace_back(t, h, -w);
      trip.emplace_back(h, t, -w);
    }
  }
  for (int i = 0; i < n; ++i) trip.emplace_back(i, i, delta);
  Eigen::SparseMatrix<double> L(n, n);
  L.setFromTriplets(trip.begin(), trip.end());
  return L;
}

Eigen::VectorXd flow_imbalance(const FlowInstance& inst, const Eigen::VectorXd& x) {
  Eigen::VectorXd r = -Eigen::Map<const Eigen::VectorXd>(inst.supply.data(), inst.node_count);
  for (std::size_t a = 0; a < inst.arcs.size(); ++a) {
    r[inst.arcs[a].tail] -= x[static_cast<Eigen::Index>(a)];
    r[inst.arcs[a].head] += x[static_cast<Eigen::Index>(a)];
  }
  return r;
}

double delay_cost(double y, double c) { return y / (c - y); }

}  // namespace

const char* to_string(FlowKind k) { return k == FlowKind::quadratic ? "quadratic" : "delay"; }

FlowKind parse_flow_kind(const std::string& s) {
  if (s == "quadratic") return FlowKind::quadratic;
  if (s == "delay") return FlowKind::delay;
  throw std::invalid_argument("unknown flow kind '" + s + "' (expected quadratic or delay)");
}

// ---------------------------------------------------------------- FlowInstance

Network FlowInstance::network() const {
  std::vector<std::pair<int, int>> e;
  e.reserve(arcs.size());
  for (const Arc& a : arcs) e.emplace_back(a.tail, a.head);
  return Network::from_edges(node_count, std::move(e));
}

ComponentMap FlowInstance::component_map() const {
  std::vector<std::vector<int>> domains(node_count);
  for (std::size_t a = 0; a < arcs.size(); ++a) {
    domains[arcs[a].tail].push_back(static_cast<int>(a));
    domains[arcs[a].head].push_back(static_cast<int>(a));
  }
  return ComponentMap::from_node_domains(static_cast<int>(arcs.size()), std::move(domains));
}

Eigen::SparseMatrix<double> FlowInstance::incidence() const {
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t a = 0; a < arcs.size(); ++a) {
    trip.emplace_back(arcs[a].tail, static_cast<int>(a), -1.0);
    trip.emplace_back(arcs[a].head, static_cast<int>(a), 1.0);
  }
  Eigen::SparseMatrix<double> B(node_count, static_cast<Eigen::Index>(arcs.size()));
  B.setFromTriplets(trip.begin(), trip.end());
  return B;
}

std::vector<int> FlowInstance::incident_arcs(int p) const {
  std::vector<int> out;
  for (std::size_t a = 0; a < arcs.size(); ++a)
    if (arcs[a].tail == p || arcs[a].head == p) out.push_back(static_cast<int>(a));
  return out;
}

Eigen::VectorXd FlowInstance::local_signs(int p) const {
  const auto inc = incident_arcs(p);
  Eigen::VectorXd b(static_cast<Eigen::Index>(inc.size()));
  for (std::size_t i = 0; i < inc.size(); ++i) b[static_cast<Eigen::Index>(i)] = arcs[inc[i]].tail == p ? -1.0 : 1.0;
  return b;
}

double FlowInstance::objective(const Eigen::VectorXd& x) const {
  double acc = 0;
  for (std::size_t a = 0; a < arcs.size(); ++a) {
    const double xa = x[static_cast<Eigen::Index>(a)];
    if (kind == FlowKind::quadratic) {
      acc += 0.5 * (xa - arcs[a].weight) * (xa - arcs[a].weight);
    } else {
      if (xa < 0 || xa >= arcs[a].weight) return std::numeric_limits<double>::infinity();
      acc += delay_cost(xa, arcs[a].weight);
    }
  }
  return acc;
}

double FlowInstance::conservation_residual(const Eigen::VectorXd& x) const {
  return flow_imbalance(*this, x).lpNorm<Eigen::Infinity>();
}

void FlowInstance::validate() const {
  if (node_count < 2) throw std::invalid_argument("flow instance needs at least two nodes");
  if (static_cast<int>(supply.size()) != node_count || supply_cents.size() != supply.size())
    throw std::invalid_argument("flow instance supply size does not match node count");
  for (std::size_t a = 0; a < arcs.size(); ++a) {
    const Arc& arc = arcs[a];
    if (arc.tail < 0 || arc.head < 0 || arc.tail >= node_count || arc.head >= node_count || arc.tail == arc.head)
      throw std::invalid_argument("invalid arc " + std::to_string(a));
    if (!(arc.weight > 0) || !std::isfinite(arc.weight))
      throw std::invalid_argument("arc " + std::to_string(a) + " needs a positive weight");
    if (a > 0 && !(std::make_pair(arcs[a - 1].tail, arcs[a - 1].head) < std::make_pair(arc.tail, arc.head)))
      throw std::invalid_argument("arcs must be sorted and unique");
  }
  std::int64_t total = 0;
  for (auto c : supply_cents) total += c;
  if (total != 0) throw std::invalid_argument("supplies do not sum to zero");
}

double draw_flow_weight(Rng& rng) {
  static const double values[] = {10, 20, 30, 40, 50, 100};
  static const std::vector<double> probs = {0.2, 0.2, 0.2, 0.2, 0.1, 0.1};
  return values[rng.weighted_index(probs)];
}

FlowInstance generate_flow_instance(const Network& net, int K, std::uint64_t seed, FlowKind kind) {
  if (K < 0) throw std::invalid_argument("K must be nonnegative");
  if (net.node_count() < 2) throw std::invalid_argument("flow instance needs at least two nodes");
  Rng rng(seed);
  FlowInstance inst;
  inst.node_count = net.node_count();
  inst.kind = kind;
  inst.seed = seed;
  for (const Edge& e : net.edges()) {
    const bool forward = rng.uniform01() < 0.5;
    const double w = draw_flow_weight(rng);
    inst.arcs.push_back(forward ? Arc{e.u, e.v, w} : Arc{e.v, e.u, w});
  }
  std::sort(inst.arcs.begin(), inst.arcs.end(),
            [](const Arc& a, const Arc& b) { return std::tie(a.tail, a.head) < std::tie(b.tail, b.head); });

  std::vector<std::vector<int>> out(inst.node_count);
  for (const Arc& a : inst.arcs) out[a.tail].push_back(a.head);
  auto reachable_from = [&](int s) {
    std::vector<char> seen(inst.node_count, 0);
    std::queue<int> q;
    q.push(s);
    seen[s] = 1;
    std::vector<int> r;
    while (!q.empty()) {
      const int p = q.front();
      q.pop();
      for (int h : out[p])
        if (!seen[h]) {
          seen[h] = 1;
          r.push_back(h);
          q.push(h);
        }
    }
    std::sort(r.begin(), r.end());
    return r;
  };

  inst.supply_cents.assign(inst.node_count, 0);
  for (int k = 0; k < K; ++k) {
    std::vector<int> reach;
    int source = -1;
    for (int attempt = 0; reach.empty(); ++attempt) {
      if (attempt > 100 * inst.node_count) throw std::runtime_error("no node reaches any other node");
      source = static_cast<int>(rng.uniform_index(inst.node_count));
      reach = reachable_from(source);
    }
    const int sink = reach[rng.uniform_index(reach.size())];
    const auto f = static_cast<std::int64_t>(draw_flow_weight(rng));
    inst.supply_cents[source] -= f;
    inst.supply_cents[sink] += f;
  }
  inst.supply.resize(inst.node_count);
  for (int p = 0; p < inst.node_count; ++p) inst.supply[p] = static_cast<double>(inst.supply_cents[p]) / 100.0;
  return inst;
}

std::string serialize(const FlowInstance& inst) {
  std::ostringstream out;
  out << "flow " << inst.node_count << ' ' << inst.arcs.size() << ' ' << to_string(inst.kind) << ' ' << inst.seed
      << '\n';
  for (const Arc& a : inst.arcs) out << "arc " << a.tail << ' ' << a.head << ' ' << fmt17(a.weight) << '\n';
  for (int p = 0; p < inst.node_count; ++p) out << "supply " << p << ' ' << fmt17(inst.supply[p]) << '\n';
  return out.str();
}

FlowInstance parse_flow_instance(const std::string& text) {
  std::istringstream in(text);
  std::string tag, kind;
  FlowInstance inst;
  std::size_t n_arcs = 0;
  if (!(in >> tag >> inst.node_count >> n_arcs >> kind >> inst.seed) || tag != "flow")
    throw std::invalid_argument("flow instance: bad header");
  inst.kind = parse_flow_kind(kind);
  inst.arcs.resize(n_arcs);
  for (auto& a : inst.arcs)
    if (!(in >> tag >> a.tail >> a.head >> a.weight) || tag != "arc")
      throw std::invalid_argument("flow instance: bad arc line");
  inst.supply.assign(inst.node_count, 0.0);
  inst.supply_cents.assign(inst.node_count, 0);
  for (int i = 0; i < inst.node_count; ++i) {
    int p = 0;
    double d = 0;
    if (!(in >> tag >> p >> d) || tag != "supply" || p < 0 || p >= inst.node_count)
      throw std::invalid_argument("flow instance: bad supply line");
    inst.supply[p] = d;
    inst.supply_cents[p] = std::llround(d * 100.0);
  }
  inst.validate();
  return inst;
}

// ---------------------------------------------------------------- local problems

FlowLocalProblem::FlowLocalProblem(const FlowInstance& inst, int p, double inner_tolerance)
    : kind_(inst.kind), arcs_(inst.incident_arcs(p)), b_(inst.local_signs(p)), d_(inst.supply.at(p)),
      tol_(inner_tolerance) {
  params_.resize(static_cast<Eigen::Index>(arcs_.size()));
  for (std::size_t i = 0; i < arcs_.size(); ++i) params_[static_cast<Eigen::Index>(i)] = inst.arcs[arcs_[i]].weight;
}

double FlowLocalProblem::subproblem_value(const Eigen::VectorXd& y, const Eigen::VectorXd& v,
                                          const Eigen::VectorXd& w) const {
  double acc = v.dot(y) + 0.5 * (w.array() * y.array().square()).sum();
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (kind_ == FlowKind::quadratic)
      acc += 0.25 * (y[i] - params_[i]) * (y[i] - params_[i]);
    else
      acc += 0.5 * delay_cost(y[i], params_[i]);
  }
  return acc;
}

Eigen::VectorXd FlowLocalProblem::solve(const Eigen::VectorXd& v, const Eigen::VectorXd& weights) const {
  if (v.size() != b_.size() || weights.size() != b_.size())
    throw std::invalid_argument("flow local solve: size mismatch");
  return kind_ == FlowKind::quadratic ? solve_quadratic(v, weights) : solve_delay(v, weights);
}

Eigen::VectorXd FlowLocalProblem::solve_quadratic(const Eigen::VectorXd& v, const Eigen::VectorXd& w) const {
  // (1/2)(y - a) + v + w y + mu b = 0 and b'y = d.
  const Eigen::ArrayXd c = 0.5 + w.array();
  const Eigen::ArrayXd base = (0.5 * params_.array() - v.array()) / c;
  const double mu = ((b_.array() * base).sum() - d_) / (b_.array().square() / c).sum();
  return (base - mu * b_.array() / c).matrix();
}

Eigen::VectorXd FlowLocalProblem::solve_delay(const Eigen::VectorXd& v, const Eigen::VectorXd& w) const {
  const Eigen::VectorXd lower = Eigen::VectorXd::Zero(b_.size());
  const Eigen::VectorXd upper = params_ * (1.0 - kDelayEpsilon);
  auto f = [&](const Eigen::VectorXd& y) { return subproblem_value(y, v, w); };
  auto g = [&](const Eigen::VectorXd& y) -> Eigen::VectorXd {
    return (0.5 * params_.array() / (params_.array() - y.array()).square() + v.array() + w.array() * y.array())
        .matrix();
  };
  auto proj = [&](const Eigen::VectorXd& y) { return project_box_hyperplane(y, b_, d_, lower, upper); };
  const Eigen::VectorXd start = (-v.array() / w.array()).matrix();
  SpgOptions opts;
  opts.tolerance = tol_;
  SpgResult r = spg_minimize(f, g, proj, start, opts);
  if (!r.converged) throw SolverError("delay subproblem: SPG did not converge", r.residual);
  return r.x;
}

ProblemSet make_flow_problems(const FlowInstance& inst, double inner_tolerance) {
  ProblemSet out(inst.node_count);
  for (int p = 0; p < inst.node_count; ++p) out[p] = std::make_shared<FlowLocalProblem>(inst, p, inner_tolerance);
  return out;
}

Eigen::VectorXd arc_values(const FlowInstance& inst, const CopyState& state, bool from_tail) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(inst.arcs.size()));
  for (std::size_t a = 0; a < inst.arcs.size(); ++a) {
    const int node = from_tail ? inst.arcs[a].tail : inst.arcs[a].head;
    x[static_cast<Eigen::Index>(a)] = state.copy(node, static_cast<int>(a))[0];
  }
  return x;
}

// ---------------------------------------------------------------- references

Eigen::VectorXd flow_primal_from_dual(const FlowInstance& inst, const Eigen::VectorXd& lambda) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(inst.arcs.size()));
  for (std::size_t a = 0; a < inst.arcs.size(); ++a) {
    const Arc& arc = inst.arcs[a];
    const double s = lambda[arc.tail] - lambda[arc.head];
    if (inst.kind == FlowKind::quadratic) {
      x[static_cast<Eigen::Index>(a)] = arc.weight + s;
    } else {
      const double c = arc.weight;
      x[static_cast<Eigen::Index>(a)] = s * c > 1.0 ? c - std::sqrt(c / s) : 0.0;
    }
  }
  return x;
}

namespace {

Eigen::VectorXd quadratic_reference(const FlowInstance& inst) {
  const Eigen::Index n = inst.node_count - 1;
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(inst.arcs.size()));
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(grounded_laplacian(inst, ones, 0.0));
  if (ldlt.info() != Eigen::Success) throw SolverError("flow reference: Laplacian factorization failed");
  Eigen::VectorXd a(static_cast<Eigen::Index>(inst.arcs.size()));
  for (std::size_t i = 0; i < inst.arcs.size(); ++i) a[static_cast<Eigen::Index>(i)] = inst.arcs[i].weight;
  // x(lambda) = a + lambda_t - lambda_h, so B x moves by -L dlambda. One solve plus refinement.
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(inst.node_count);
  Eigen::VectorXd x = a;
  for (int pass = 0; pass < 3; ++pass) {
    const Eigen::VectorXd r = flow_imbalance(inst, x);  // Bx - d
    Eigen::VectorXd step = ldlt.solve(r.tail(n));
    lambda.tail(n) += step;
    x = flow_primal_from_dual(inst, lambda);
  }
  return x;
}

double dual_value(const FlowInstance& inst, const Eigen::VectorXd& mu) {
  // q(mu) = -sum_a (sqrt(c s) - 1)_+^2 - mu'd, with s = mu_t - mu_h.
  double q = 0;
  for (const Arc& a : inst.arcs) {
    const double cs = a.weight * (mu[a.tail] - mu[a.head]);
    if (cs > 1.0) {
      const double r = std::sqrt(cs) - 1.0;
      q -= r * r;
    }
  }
  for (int p = 0; p < inst.node_count; ++p) q -= mu[p] * inst.supply[p];
  return q;
}

Eigen::VectorXd delay_reference(const FlowInstance& inst, double tolerance) {
  const Eigen::Index n = inst.node_count - 1;
  const double dscale = std::max(1.0, Eigen::Map<const Eigen::VectorXd>(inst.supply.data(), inst.node_count)
                                          .lpNorm<Eigen::Infinity>());
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(inst.node_count);
  Eigen::VectorXd x = flow_primal_from_dual(inst, mu);
  Eigen::VectorXd slope(static_cast<Eigen::Index>(inst.arcs.size()));
  double q = dual_value(inst, mu);
  for (int it = 0; it < 500; ++it) {
    const Eigen::VectorXd g = flow_imbalance(inst, x);  // gradient of q
    const double gnorm = g.lpNorm<Eigen::Infinity>();
    if (gnorm <= tolerance * dscale) return x;
    for (std::size_t a = 0; a < inst.arcs.size(); ++a) {
      const Arc& arc = inst.arcs[a];
      const double s = mu[arc.tail] - mu[arc.head];
      slope[static_cast<Eigen::Index>(a)] = s * arc.weight > 1.0 ? 0.5 * std::sqrt(arc.weight) * std::pow(s, -1.5) : 0.0;
    }
    // Regularized semismooth Newton step on the grounded system.
    const double delta = std::min(1.0, gnorm) * 1e-2 + 1e-14;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(grounded_laplacian(inst, slope, delta));
    if (ldlt.info() != Eigen::Success) throw SolverError("delay reference: Newton system failed", gnorm);
    Eigen::VectorXd dir = Eigen::VectorXd::Zero(inst.node_count);
    dir.tail(n) = ldlt.solve(g.tail(n));
    const double gd = g.tail(n).dot(dir.tail(n));
    double t = 1.0;
    Eigen::VectorXd trial;
    double qt = 0;
    int backtracks = 0;
    for (;;) {
      trial = mu + t * dir;
      qt = dual_value(inst, trial);
      if (qt >= q + 1e-4 * t * gd || backtracks > 80) break;
      t *= 0.5;
      ++backtracks;
    }
    if (backtracks > 80) break;
    mu = trial;
    q = qt;
    x = flow_primal_from_dual(inst, mu);
  }
  const double res = flow_imbalance(inst, x).lpNorm<Eigen::Infinity>();
  if (res > tolerance * dscale * 1e3)
    throw SolverError("delay reference did not converge (instance may be infeasible)", res);
  return x;
}

}  // namespace

Eigen::VectorXd centralized_flow_reference(const FlowInstance& inst, double tolerance) {
  inst.validate();
  return inst.kind == FlowKind::quadratic ? quadratic_reference(inst) : delay_reference(inst, tolerance);
}

double flow_dual_lipschitz(const FlowInstance& inst) {
  const Eigen::SparseMatrix<double> B = inst.incidence();
  const Eigen::SparseMatrix<double> L = B * B.transpose();
  Eigen::VectorXd v(inst.node_count);
  for (int p = 0; p < inst.node_count; ++p) v[p] = 1.0 + 0.5 * std::sin(1.0 + p);
  v.normalize();
  double est = 0;
  for (int it = 0; it < 100000; ++it) {
    Eigen::VectorXd w = L * v;
    const double next = v.dot(w);
    v = w.normalized();
    if (it > 10 && std::abs(next - est) <= 1e-13 * next) {
      est = next;
      break;
    }
    est = next;
  }
  // The Rayleigh quotient approaches from below; a tiny margin keeps 1/L a safe step.
  return est * (1.0 + 1e-9);
}

RunTrace nesterov_dual_baseline(const FlowInstance& inst, const NesterovConfig& cfg,
                                const std::optional<Eigen::VectorXd>& reference) {
  double L = cfg.lipschitz;
  if (L <= 0) {
    if (inst.kind != FlowKind::quadratic)
      throw std::invalid_argument("Nesterov baseline on delay instances needs a Lipschitz constant");
    L = flow_dual_lipschitz(inst);
  }
  if (cfg.max_cs < 1) throw std::invalid_argument("max_cs must be at least 1");
  const auto start = std::chrono::steady_clock::now();
  const double ref_norm = reference ? reference->lpNorm<Eigen::Infinity>() : 0.0;
  if (reference && !(ref_norm > 0)) throw std::invalid_argument("relative error needs a nonzero reference");

  RunTrace trace;
  trace.status = RunStatus::max_steps;
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(inst.node_count);
  Eigen::VectorXd eta = lambda;
  double t = 1.0;
  std::int64_t cumulative = 0;
  for (int cs = 1; cs <= cfg.max_cs; ++cs) {
    const Eigen::VectorXd grad = flow_imbalance(inst, flow_primal_from_dual(inst, eta));
    const Eigen::VectorXd next = eta + grad / L;
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    eta = next + ((t - 1.0) / t_next) * (next - lambda);
    lambda = next;
    t = t_next;

    cumulative += inst.node_count;
    TraceRecord rec;
    rec.cs = cs;
    rec.payload = inst.node_count;
    rec.payload_cumulative = cumulative;
    const Eigen::VectorXd x = flow_primal_from_dual(inst, lambda);
    rec.relative_error = reference ? (x - *reference).lpNorm<Eigen::Infinity>() / ref_norm
                                   : std::numeric_limits<double>::quiet_NaN();
    rec.wallclock = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    trace.records.push_back(rec);
    if (!x.allFinite() || !lambda.allFinite() || (reference && !(rec.relative_error <= cfg.divergence_threshold))) {
      trace.status = RunStatus::diverged;
      break;
    }
    if (reference && cfg.target_error > 0 && rec.relative_error <= cfg.target_error) {
      trace.status = RunStatus::converged;
      break;
    }
  }
  return trace;
}

}  // namespace padmm
