#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "padmm/engine.hpp"
#include "padmm/graph.hpp"

namespace padmm {

enum class FlowKind { quadratic, delay };
const char* to_string(FlowKind k);
FlowKind parse_flow_kind(const std::string& s);

/// Arc (tail -> head). weight is a_ij for quadratic costs and the capacity
/// c_ij for delay costs.
struct Arc {
  int tail = 0;
  int head = 0;
  double weight = 0;
};

/// Single-commodity flow problem on a directed version of the network:
///
///   minimize  sum_a phi_a(x_a)   subject to  Bx = d  (and 0 <= x <= c for delay)
///
/// quadratic: phi(x) = (1/2)(x - a)^2, no bounds.
/// delay:     phi(x) = x / (c - x), 0 <= x < c.
///
/// Arcs are sorted lexicographically by (tail, head); arc index == component.
/// B has -1 at the tail and +1 at the head.
struct FlowInstance {
  int node_count = 0;
  FlowKind kind = FlowKind::quadratic;
  std::uint64_t seed = 0;
  std::vector<Arc> arcs;
  std::vector<double> supply;              // d
  std::vector<std::int64_t> supply_cents;  // 100 d, exact

  Network network() const;
  /// S_p = arcs incident to p.
  ComponentMap component_map() const;
  Eigen::SparseMatrix<double> incidence() const;
  /// Incident arc ids of p (ascending) and b_p restricted to them.
  std::vector<int> incident_arcs(int p) const;
  Eigen::VectorXd local_signs(int p) const;
  double objective(const Eigen::VectorXd& x) const;
  /// ||Bx - d||_inf
  double conservation_residual(const Eigen::VectorXd& x) const;
  void validate() const;
};

/// Random directions and weights on the network's edges plus K source/sink
/// injections of f/100 (f drawn like the weights). Sinks are drawn from the
/// set reachable from the source along arcs; sources with nothing reachable
/// are redrawn.
FlowInstance generate_flow_instance(const Network& net, int K, std::uint64_t seed, FlowKind kind);

/// Draws from {10,20,30,40,50,100} with probabilities {.2,.2,.2,.2,.1,.1}.
double draw_flow_weight(class Rng& rng);

/// Text format:
///   flow <P> <arcs> <kind> <seed>
///   arc <tail> <head> <weight>      (one per arc)
///   supply <p> <d_p>                (one per node)
/// Reals are written with 17 significant digits.
std::string serialize(const FlowInstance& inst);
FlowInstance parse_flow_instance(const std::string& text);

// -------------------------------------------------------------- local problems

/// Node p's share of a flow problem: half of each incident arc's cost plus
/// the conservation constraint b_p'y = d_p.
class FlowLocalProblem final : public LocalProblem {
 public:
  FlowLocalProblem(const FlowInstance& inst, int p, double inner_tolerance = 1e-10);

  const std::vector<int>& domain() const override { return arcs_; }
  Eigen::VectorXd solve(const Eigen::VectorXd& v, const Eigen::VectorXd& weights) const override;

  FlowKind kind() const { return kind_; }
  const Eigen::VectorXd& signs() const { return b_; }
  const Eigen::VectorXd& params() const { return params_; }
  double demand() const { return d_; }

  /// sum_i (1/2) phi_i(y_i) + v'y + (1/2) sum_i w_i y_i^2 (no constraint term).
  double subproblem_value(const Eigen::VectorXd& y, const Eigen::VectorXd& v, const Eigen::VectorXd& w) const;

 private:
  Eigen::VectorXd solve_quadratic(const Eigen::VectorXd& v, const Eigen::VectorXd& w) const;
  Eigen::VectorXd solve_delay(const Eigen::VectorXd& v, const Eigen::VectorXd& w) const;

  FlowKind kind_;
  std::vector<int> arcs_;
  Eigen::VectorXd b_;
  Eigen::VectorXd params_;
  double d_;
  double tol_;
};

/// Interior safeguard for delay arcs: y <= c - kDelayEpsilon * c.
inline constexpr double kDelayEpsilon = 1e-9;

ProblemSet make_flow_problems(const FlowInstance& inst, double inner_tolerance = 1e-10);

/// Arc values read from one endpoint's copies (tail when from_tail).
Eigen::VectorXd arc_values(const FlowInstance& inst, const CopyState& state, bool from_tail = true);

// -------------------------------------------------------------- references and baseline

/// Quadratic: x = a - B'mu with (BB')mu = Ba - d on the grounded Laplacian.
/// Delay: semismooth Newton on the dual; per arc x = c - sqrt(c/s) when
/// s = mu_tail - mu_head > 1/c, else 0. Throws SolverError if infeasible.
Eigen::VectorXd centralized_flow_reference(const FlowInstance& inst, double tolerance = 1e-12);

/// Primal minimizer of the Lagrangian for multipliers lambda (one per node).
Eigen::VectorXd flow_primal_from_dual(const FlowInstance& inst, const Eigen::VectorXd& lambda);

/// Largest eigenvalue of BB' (the exact dual Lipschitz constant for the
/// quadratic instance), by power iteration.
double flow_dual_lipschitz(const FlowInstance& inst);

struct NesterovConfig {
  double lipschitz = 0;  // 0: exact for quadratic instances
  int max_cs = 1000;
  double target_error = 0;
  double divergence_threshold = 1e6;
};

/// Accelerated dual gradient ascent on the conservation multipliers. One CS
/// per iteration; every node sends its scalar multiplier (payload P).
RunTrace nesterov_dual_baseline(const FlowInstance& inst, const NesterovConfig& cfg,
                                const std::optional<Eigen::VectorXd>& reference);

}  // namespace padmm
