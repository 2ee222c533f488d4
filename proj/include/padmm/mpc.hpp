#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "padmm/engine.hpp"
#include "padmm/graph.hpp"

namespace padmm {

enum class CouplingPattern { star, generic, nonconnected };
const char* to_string(CouplingPattern p);
CouplingPattern parse_coupling_pattern(const std::string& s);

enum class Stability { unstable, stable };
const char* to_string(Stability s);
Stability parse_stability(const std::string& s);

/// Omega_p for every node: the nodes whose inputs drive p's state. Sorted,
/// and p ∈ Omega_p.
using Couplings = std::vector<std::vector<int>>;

/// star:         Omega_p = N_p ∪ {p}.
/// generic:      per input u_j, start from {j} with fringe N_j and `reach`
///               times move a uniformly drawn fringe node into the owner set,
///               adding its neighbors to the fringe.
/// nonconnected: like generic, but the pick ranges over every node not yet
///               an owner; fringe nodes weigh 2, the rest 1.
/// The owner sets are then transposed into Omega (p ∈ owners(u_j) <=> j ∈ Omega_p).
Couplings generate_couplings(const Network& net, CouplingPattern pattern, int reach, std::uint64_t seed);

/// Component j is u_j with dimension input_dims[j] * horizon; S_p = Omega_p.
ComponentMap coupling_map(const Couplings& omega, const std::vector<int>& input_dims, int horizon);

/// One input-coupled linear subsystem
///
///   x_p[t+1] = A x_p[t] + sum_{j ∈ Omega_p} B_pj u_j[t],   x_p[0] = x0
///
/// with stage cost x'Qbar x + u_p'Rbar u_p and terminal cost x[T]'Qf x[T].
struct MpcNode {
  Eigen::MatrixXd A;
  std::vector<int> omega;          // ascending
  std::vector<Eigen::MatrixXd> B;  // aligned with omega, n x m_j
  Eigen::MatrixXd Qbar, Qf, Rbar;
  Eigen::VectorXd x0;

  int state_dim() const { return static_cast<int>(A.rows()); }
  int input_dim() const { return static_cast<int>(Rbar.rows()); }
};

struct MpcSystem {
  int horizon = 5;
  std::uint64_t seed = 0;
  std::vector<MpcNode> nodes;

  int node_count() const { return static_cast<int>(nodes.size()); }
  std::vector<int> input_dims() const;
  ComponentMap component_map() const;
  /// Throws std::invalid_argument on inconsistent dimensions or couplings.
  void validate() const;
};

struct MpcDims {
  int state = 3;
  int input = 1;
  int horizon = 5;
};

/// Entries of A_p and B_pj standard normal (drawn per node: A row-major,
/// then B_pj for ascending j, then x0). Stable mode rescales A_p by
/// 0.99 / rho(A_p) when its spectral radius exceeds 1. Weights are identity.
MpcSystem generate_systems(const Network& net, const Couplings& omega, Stability stability, const MpcDims& dims,
                           std::uint64_t seed);

/// sum_p u_p'R_p u_p + x_p'Q_p x_p with x_p from simulating the dynamics.
/// `u` is the global input vector in component order.
double rollout_objective(const MpcSystem& sys, const Eigen::VectorXd& u);

/// Per-node condensed data. The columns of C follow the node's domain:
/// block j (ascending in Omega_p) holds u_j[0], ..., u_j[T-1].
struct CondensedNode {
  std::vector<int> domain;
  std::vector<int> dims;
  Eigen::MatrixXd C;   // (T+1) n x sum dims
  Eigen::VectorXd D0;  // stacked A^t x0, t = 0..T
  Eigen::MatrixXd E;   // R_p (own block) + C'Q_p C
  Eigen::VectorXd w;   // 2 C'Q_p D0
  double constant = 0; // D0'Q_p D0
};

/// Input-only form  minimize sum_p u_Sp' E_p u_Sp + w_p' u_Sp (+ constants).
struct CondensedMpc {
  ComponentMap cmap;
  std::vector<CondensedNode> nodes;

  double objective(const Eigen::VectorXd& u) const;
  /// Global Hessian sum_p scatter(2 E_p); sparse, symmetric.
  Eigen::SparseMatrix<double> hessian() const;
  /// Global linear term sum_p scatter(w_p).
  Eigen::VectorXd linear_term() const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& u) const;
};

CondensedMpc condense(const MpcSystem& sys);

/// QuadraticLocalProblem per node over its domain.
ProblemSet make_mpc_problems(const CondensedMpc& mpc);

/// argmin_y y'E_p y + w_p'y + v'y + (1/2) sum_l weights[l] ||y_l||^2.
/// Throws SolverError when the system is not numerically positive definite.
Eigen::VectorXd solve_local_mpc(const CondensedMpc& mpc, int p, const Eigen::VectorXd& v,
                                const Eigen::VectorXd& weights);

/// Unconstrained minimizer of the global quadratic (sparse LDLT plus
/// iterative refinement). Throws SolverError for a singular Hessian.
Eigen::VectorXd centralized_mpc_reference(const CondensedMpc& mpc);

/// Text format:
///   mpc <P> <T> <seed>
///   node <p> <n> <m> <|Omega_p|> <Omega_p ...>
///   A / Qbar / Qf / Rbar <p> <values, row-major>
///   B <p> <j> <values, row-major>
///   x0 <p> <values>
std::string serialize(const MpcSystem& sys);
MpcSystem parse_mpc_system(const std::string& text);

}  // namespace padmm
