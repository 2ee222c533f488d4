#pragma once

#include <map>
#include <memory>
#include <tuple>

#include <Eigen/Dense>

#include "padmm/engine.hpp"
#include "padmm/graph.hpp"

namespace padmm {

/// Direct C-block Extended ADMM on the edge-constraint formulation, with
/// explicit matrices. Used only to validate the distributed algorithms.
///
/// For each component l the constraint block is A_l z_l = 0, one row per
/// edge (i,j) in E_l (i < j) with +1 at copy i and -1 at copy j. Columns are
/// grouped by node color; an iteration minimizes the augmented Lagrangian
/// over each color block in turn and then does one dual ascent step.
///
/// Local functions must be QuadraticLocalProblem (or nullptr).
class ExtendedAdmmReference {
 public:
  ExtendedAdmmReference(const Network& net, const Coloring& coloring, const ComponentMap& cmap,
                        const ProblemSet& problems, double rho, int max_size = 2000);

  void iterate();

  /// Copies in ConsensusLayout order (comparable to CopyState::x).
  const Eigen::VectorXd& copies() const { return z_; }
  Eigen::VectorXd copy(int p, int l) const;
  const ConsensusLayout& layout() const { return *layout_; }

  /// Multiplier of the constraint row for edge {p, j} of component l
  /// (stored once per undirected edge, oriented min -> max).
  Eigen::VectorXd edge_dual(int l, int p, int j) const;
  /// Directed multiplier lambda_l^{ij}, updated with x_i - x_j.
  Eigen::VectorXd directed_dual(int l, int i, int j) const;

  /// (A_l^c)' A_l^c where A_l^c keeps the columns of color-c members of V_l.
  Eigen::MatrixXd block_gram(int l, int c) const;
  int iteration() const { return iteration_; }

 private:
  struct Row {
    int component;
    int i;  // node, i < j
    int j;
    int row;  // first row in A
  };

  std::shared_ptr<const ConsensusLayout> layout_;
  Coloring coloring_;
  double rho_;
  Eigen::MatrixXd A_;
  Eigen::MatrixXd Q_;  // Hessian of sum_p f_p over the copies
  Eigen::VectorXd q_;  // linear term
  Eigen::VectorXd z_;
  Eigen::VectorXd lambda_;
  std::vector<Row> rows_;
  std::map<std::tuple<int, int, int>, Eigen::VectorXd> directed_;
  std::vector<std::vector<int>> color_columns_;
  int iteration_ = 1;
};

}  // namespace padmm
