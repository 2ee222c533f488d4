#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace padmm {

/// Euclidean projection of y0 onto {y : b'y = d, lower <= y <= upper}.
///
/// Bisection on the multiplier mu of y(mu) = clip(y0 - mu b, lower, upper),
/// whose constraint residual b'y(mu) - d is nonincreasing in mu, followed
/// by an exact solve for mu on the final free set. Entries of b must be
/// nonzero and the bounds finite. Throws SolverError when the set is empty.
Eigen::VectorXd project_box_hyperplane(const Eigen::VectorXd& y0, const Eigen::VectorXd& b, double d,
                                       const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                                       double tol = 1e-12);

struct SpgOptions {
  double tolerance = 1e-10;  // on ||P(x - g) - x||_inf
  int max_iterations = 20000;
  int memory = 10;           // nonmonotone window M
  double gamma = 1e-4;       // sufficient decrease
  double alpha_min = 1e-30;
  double alpha_max = 1e30;
  bool record = false;       // keep per-step line-search data
};

struct SpgStep {
  double f_new = 0;
  double f_ref = 0;      // max of the last M accepted values
  double lambda = 0;
  double directional = 0;  // g'd
};

struct SpgResult {
  Eigen::VectorXd x;
  double f = 0;
  double residual = 0;
  int iterations = 0;
  bool converged = false;
  std::vector<SpgStep> steps;
};

using Objective = std::function<double(const Eigen::VectorXd&)>;
using Gradient = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using Projection = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Spectral projected gradient with nonmonotone line search (Birgin,
/// Martinez, Raydan). x0 need not be feasible; it is projected first.
/// The objective must be finite on the feasible set.
SpgResult spg_minimize(const Objective& f, const Gradient& grad, const Projection& proj, const Eigen::VectorXd& x0,
                       const SpgOptions& opts = {});

}  // namespace padmm
