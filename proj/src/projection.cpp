#include "padmm/projection.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "padmm/engine.hpp"

namespace padmm {

namespace {

Eigen::VectorXd clipped(const Eigen::VectorXd& y0, const Eigen::VectorXd& b, double mu, const Eigen::VectorXd& lo,
                        const Eigen::VectorXd& hi) {
  return (y0 - mu * b).cwiseMax(lo).cwiseMin(hi);
}

}  // namespace

Eigen::VectorXd project_box_hyperplane(const Eigen::VectorXd& y0, const Eigen::VectorXd& b, double d,
                                       const Eigen::VectorXd& lower, const Eigen::VectorXd& upper, double tol) {
  const Eigen::Index n = y0.size();
  if (b.size() != n || lower.size() != n || upper.size() != n)
    throw std::invalid_argument("projection: size mismatch");
  if (n == 0) {
    if (std::abs(d) > tol) throw SolverError("projection onto an empty hyperplane", std::abs(d));
    return y0;
  }
  if ((lower.array() > upper.array()).any()) throw SolverError("projection: lower bound above upper bound");
  if ((b.array() == 0.0).any()) throw std::invalid_argument("projection: b has a zero entry");

  // Range of b'y over the box.
  double hmin = 0, hmax = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    hmin += std::min(b[i] * lower[i], b[i] * upper[i]);
    hmax += std::max(b[i] * lower[i], b[i] * upper[i]);
  }
  const double scale = std::max({1.0, std::abs(d), std::abs(hmin), std::abs(hmax)});
  if (d < hmin - tol * scale || d > hmax + tol * scale)
    throw SolverError("projection: hyperplane misses the box", std::max(hmin - d, d - hmax));

  // Bracket from the breakpoints; beyond them y(mu) is saturated.
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = (y0[i] - lower[i]) / b[i];
    const double c = (y0[i] - upper[i]) / b[i];
    lo = std::min({lo, a, c});
    hi = std::max({hi, a, c});
  }
  lo -= 1.0;
  hi += 1.0;
  auto residual = [&](double mu) { return b.dot(clipped(y0, b, mu, lower, upper)) - d; };

  double mu = 0.5 * (lo + hi);
  for (int it = 0; it < 300; ++it) {
    mu = 0.5 * (lo + hi);
    const double r = residual(mu);
    if (std::abs(r) <= tol * scale) break;
    if (r > 0)
      lo = mu;
    else
      hi = mu;
    if (hi - lo <= 1e-300) break;
  }

  // Exact multiplier on the free set of the bisection point.
  Eigen::VectorXd y = clipped(y0, b, mu, lower, upper);
  double num = -d, den = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = y0[i] - mu * b[i];
    if (t > lower[i] && t < upper[i]) {
      num += b[i] * y0[i];
      den += b[i] * b[i];
    } else {
      num += b[i] * y[i];
    }
  }
  if (den > 0) {
    const double mu_exact = num / den;
    const Eigen::VectorXd candidate = clipped(y0, b, mu_exact, lower, upper);
    if (std::abs(b.dot(candidate) - d) <= std::abs(b.dot(y) - d)) y = candidate;
  }
  const double final_residual = std::abs(b.dot(y) - d);
  if (final_residual > 1e3 * tol * scale) throw SolverError("projection bisection did not converge", final_residual);
  return y;
}

SpgResult spg_minimize(const Objective& f, const Gradient& grad, const Projection& proj, const Eigen::VectorXd& x0,
                       const SpgOptions& opts) {
  SpgResult out;
  Eigen::VectorXd x = proj(x0);
  double fx = f(x);
  Eigen::VectorXd g = grad(x);
  if (!std::isfinite(fx)) throw SolverError("SPG: objective not finite at the starting point");
  std::deque<double> history{fx};

  auto pg_residual = [&](const Eigen::VectorXd& xx, const Eigen::VectorXd& gg) {
    return (proj(xx - gg) - xx).lpNorm<Eigen::Infinity>();
  };
  double res = pg_residual(x, g);
  double alpha = res > 0 ? std::clamp(1.0 / res, opts.alpha_min, opts.alpha_max) : 1.0;

  int it = 0;
  while (res > opts.tolerance && it < opts.max_iterations) {
    ++it;
    const Eigen::VectorXd dir = proj(x - alpha * g) - x;
    const double gd = g.dot(dir);
    const double fref = *std::max_element(history.begin(), history.end());
    double lambda = 1.0;
    Eigen::VectorXd xn = x + dir;
    double fn = f(xn);
    int backtracks = 0;
    while (!(fn <= fref + opts.gamma * lambda * gd)) {
      // Safeguarded quadratic interpolation.
      double trial = -0.5 * gd * lambda * lambda / (fn - fx - lambda * gd);
      if (!std::isfinite(trial) || trial < 0.1 * lambda || trial > 0.5 * lambda) trial = 0.5 * lambda;
      lambda = trial;
      xn = x + lambda * dir;
      fn = f(xn);
      if (++backtracks > 100) break;
    }
    if (backtracks > 100) break;  // no progress possible in floating point
    if (opts.record) out.steps.push_back({fn, fref, lambda, gd});
    const Eigen::VectorXd gn = grad(xn);
    const Eigen::VectorXd s = xn - x;
    const Eigen::VectorXd y = gn - g;
    const double sy = s.dot(y);
    alpha = sy <= 0 ? opts.alpha_max : std::clamp(s.squaredNorm() / sy, opts.alpha_min, opts.alpha_max);
    x = xn;
    fx = fn;
    g = gn;
    history.push_back(fx);
    if (static_cast<int>(history.size()) > opts.memory) history.pop_front();
    res = pg_residual(x, g);
  }
  out.x = std::move(x);
  out.f = fx;
  out.residual = res;
  out.iterations = it;
  out.converged = res <= opts.tolerance;
  return out;
}

}  // namespace padmm
