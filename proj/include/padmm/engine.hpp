#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "padmm/graph.hpp"

namespace padmm {

/// A local solver failed (non-convergence, singular system, ...).
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double residual = 0.0) : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// Private function f_p of one node, exposed through its prox-style subproblem
///
///   argmin_x  f_p(x) + v'x + (1/2) sum_l weights[l] ||x_l||^2
///
/// x and v are concatenations over domain() in ascending component order,
/// each block as long as the component's dimension. weights has one entry
/// per domain component. Implementations must be reentrant: the engine may
/// call solve() for different nodes of the same color concurrently.
class LocalProblem {
 public:
  virtual ~LocalProblem() = default;
  virtual const std::vector<int>& domain() const = 0;
  virtual Eigen::VectorXd solve(const Eigen::VectorXd& v, const Eigen::VectorXd& weights) const = 0;
};

/// f_p(x) = x'Ex + w'x over the node's domain.
class QuadraticLocalProblem final : public LocalProblem {
 public:
  /// E must be symmetric; block sizes come from dims (one per domain entry).
  QuadraticLocalProblem(std::vector<int> domain, std::vector<int> dims, Eigen::MatrixXd E, Eigen::VectorXd w);

  const std::vector<int>& domain() const override { return domain_; }
  Eigen::VectorXd solve(const Eigen::VectorXd& v, const Eigen::VectorXd& weights) const override;

  const Eigen::MatrixXd& quadratic() const { return E_; }
  const Eigen::VectorXd& linear() const { return w_; }
  const std::vector<int>& dims() const { return dims_; }
  double value(const Eigen::VectorXd& x) const { return x.dot(E_ * x) + w_.dot(x); }

 private:
  std::vector<int> domain_;
  std::vector<int> dims_;
  Eigen::MatrixXd E_;
  Eigen::VectorXd w_;
};

/// One entry per node; nullptr means f_p == 0.
using ProblemSet = std::vector<std::shared_ptr<const LocalProblem>>;

/// One copy x_l^(p) held by node p.
struct CopySlot {
  int node = 0;
  int component = 0;
  int dim = 1;
  int offset = 0;                // into the flat copy vectors
  int degree = 0;                // D_{p,l} in G_l'
  bool steiner = false;          // l ∈ S_p'
  std::vector<int> neighbors;    // slot indices of the same component, ascending neighbor id
};

/// Flat indexing of every copy (node-major, then component ascending) and
/// the per-component neighbor structure of G_l' = (V_l', E_l ∪ F_l).
class ConsensusLayout {
 public:
  ConsensusLayout(const Network& net, const ComponentMap& cmap);

  const std::vector<CopySlot>& slots() const { return slots_; }
  const CopySlot& slot(int s) const { return slots_.at(s); }
  /// Slot indices of node p, ascending component.
  const std::vector<int>& node_slots(int p) const { return node_slots_.at(p); }
  std::optional<int> find(int p, int l) const;
  int find_or_throw(int p, int l) const;

  int node_count() const { return static_cast<int>(node_slots_.size()); }
  int size() const { return size_; }
  /// Scalars sent per communication step: sum_p sum_{l in S_p ∪ S_p'} dim(l).
  std::int64_t payload_per_cs() const { return size_; }
  const ComponentMap& components() const { return cmap_; }

 private:
  ComponentMap cmap_;
  std::vector<CopySlot> slots_;
  std::vector<std::vector<int>> node_slots_;
  int size_ = 0;
};

/// All copies x_l^(p) and condensed duals gamma_l^(p).
///
/// `x` holds the newest copies. `x_prev` holds the copies of the previous
/// iteration; during a color sweep it supplies the stale values of
/// larger-colored neighbors.
class CopyState {
 public:
  explicit CopyState(std::shared_ptr<const ConsensusLayout> layout);

  const ConsensusLayout& layout() const { return *layout_; }
  std::shared_ptr<const ConsensusLayout> layout_ptr() const { return layout_; }

  Eigen::VectorXd copy(int p, int l) const;
  Eigen::VectorXd dual(int p, int l) const;
  Eigen::VectorXd previous_copy(int p, int l) const;

  Eigen::VectorXd x;
  Eigen::VectorXd x_prev;
  Eigen::VectorXd gamma;
  int iteration = 1;  // k; both x and gamma start at zero

 private:
  std::shared_ptr<const ConsensusLayout> layout_;
};

struct EngineConfig {
  double rho = 1.0;
  int max_cs = 1000;
  /// Stop when the max-norm change of all copies between iterations drops below this.
  double tolerance = 1e-10;
  /// With a reference solution, also stop once relative error <= target_error (0 disables).
  double target_error = 0.0;
  /// Declared diverged above this relative error (or on any non-finite copy).
  double divergence_threshold = 1e6;
  /// Worker threads for the nodes of one color (1 = sequential).
  int threads = 1;

  void validate() const;
};

enum class RunStatus { converged, max_steps, diverged };
const char* to_string(RunStatus s);

struct TraceRecord {
  int cs = 0;
  double relative_error = 0.0;  // NaN without a reference
  std::int64_t payload = 0;     // scalars transmitted in this CS
  std::int64_t payload_cumulative = 0;
  double wallclock = 0.0;       // seconds since the run started
};

struct RunTrace {
  std::vector<TraceRecord> records;
  RunStatus status = RunStatus::max_steps;

  /// First CS whose error is <= threshold, if any.
  std::optional<int> cs_to_error(double threshold) const;
  std::optional<std::int64_t> payload_to_error(double threshold) const;
};

struct RunResult {
  RunTrace trace;
  CopyState state;
};

/// ||x^k - x*||_inf / ||x*||_inf over the non-Steiner copies, in (node,
/// component) order. `reference` is the global vector (ComponentMap offsets).
double relative_error(const CopyState& state, const Eigen::VectorXd& reference);

// -------------------------------------------------------------- single steps

/// v for Algorithm 1/3: gamma - rho * (fresh copies of smaller-colored
/// neighbors + stale copies of larger-colored neighbors). Sums in ascending
/// neighbor id. Throws GraphError when l ∉ S_p ∪ S_p'.
Eigen::VectorXd compute_v_alg1(const CopyState& state, const Coloring& coloring, int p, int l, double rho);

/// v for Algorithm 2: gamma - (rho/2) (D x_p^k + sum_j x_j^k), all from x_prev.
Eigen::VectorXd compute_v_alg2(const CopyState& state, int p, int l, double rho);

/// gamma + rho * sum_j (x_p - x_j) on the newest copies.
Eigen::VectorXd dual_update_alg1(const CopyState& state, int p, int l, double rho);

/// gamma + (rho/2) * sum_j (x_p - x_j).
Eigen::VectorXd dual_update_alg2(const CopyState& state, int p, int l, double rho);

/// Local step at node p: f_p's components go through problem->solve with
/// weights rho*D, every other copy (Steiner, or outside f_p's domain in
/// global mode) uses the closed form x = -v / (rho D). `v` is laid out like
/// node p's slots. Returns the new copies in the same layout.
Eigen::VectorXd local_solve(const ConsensusLayout& layout, int p, const LocalProblem* problem,
                            const Eigen::VectorXd& v, double rho);

// -------------------------------------------------------------- engine

enum class Scheme {
  color_sweep,  // Algorithms 1 and 3
  parallel      // Algorithm 2
};

/// Iterates one of the consensus schemes; one iteration is one CS.
class ConsensusEngine {
 public:
  /// `coloring` is required for Scheme::color_sweep. Throws GraphError when a
  /// component's (augmented) induced subgraph is disconnected.
  ConsensusEngine(const Network& net, const ComponentMap& cmap, ProblemSet problems, EngineConfig config,
                  Scheme scheme, std::optional<Coloring> coloring = std::nullopt);

  void iterate();

  const CopyState& state() const { return state_; }
  CopyState& mutable_state() { return state_; }
  const ConsensusLayout& layout() const { return *layout_; }
  const EngineConfig& config() const { return config_; }
  /// Max-norm change of all copies in the last iteration.
  double last_change() const { return last_change_; }

 private:
  void update_node(int p);
  void sweep(const std::vector<int>& nodes);

  std::shared_ptr<const ConsensusLayout> layout_;
  ProblemSet problems_;
  EngineConfig config_;
  Scheme scheme_;
  std::optional<Coloring> coloring_;
  std::vector<int> all_nodes_;
  CopyState state_;
  double last_change_ = 0.0;
};

/// Runs an engine to a stopping condition and records one trace row per CS.
RunResult drive(ConsensusEngine& engine, const std::optional<Eigen::VectorXd>& reference);

/// Algorithm 1 (connected variable, color-ordered Extended ADMM).
RunResult run_algorithm1(const Network& net, const Coloring& coloring, const ComponentMap& cmap,
                         const ProblemSet& problems, const EngineConfig& config,
                         const std::optional<Eigen::VectorXd>& reference = std::nullopt);

/// Algorithm 2 (2-block ADMM, all nodes in parallel). Accepts a
/// Steiner-augmented map for the generalized variant.
RunResult run_algorithm2(const Network& net, const ComponentMap& cmap, const ProblemSet& problems,
                         const EngineConfig& config,
                         const std::optional<Eigen::VectorXd>& reference = std::nullopt);

/// Algorithm 3: Steiner preprocessing, then the color sweep over S_p ∪ S_p'.
RunResult run_algorithm3(const Network& net, const Coloring& coloring, const ComponentMap& cmap,
                         const ProblemSet& problems, const EngineConfig& config,
                         const std::optional<Eigen::VectorXd>& reference = std::nullopt);

}  // namespace padmm
