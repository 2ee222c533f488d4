#pragma once

// Shared test fixtures and brute-force oracles. Nothing here is used by the
// library itself.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <queue>
#include <vector>

#include <Eigen/Dense>

#include "padmm/engine.hpp"
#include "padmm/graph.hpp"
#include "padmm/mpc.hpp"
#include "padmm/rng.hpp"

namespace fixtures {

using padmm::ComponentMap;
using padmm::Network;

// 1-based labels of the six-node example shifted to 0-based.
inline Network six_node_example() {
  return Network::from_edges(6, {{0, 1}, {0, 5}, {1, 2}, {1, 5}, {2, 3}, {3, 4}, {4, 5}});
}

inline Network path(int n) {
  std::vector<std::pair<int, int>> e;
  for (int i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  return Network::from_edges(n, e);
}

/// Random connected graph: random spanning tree plus extra edges.
inline Network random_connected(int n, double extra_prob, padmm::Rng& rng) {
  std::vector<std::pair<int, int>> e;
  for (int i = 1; i < n; ++i) e.emplace_back(static_cast<int>(rng.uniform_index(i)), i);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.uniform01() < extra_prob) e.emplace_back(i, j);
  return Network::from_edges(n, e);
}

/// Connected node set grown from a random seed node by BFS-like fringe picks.
inline std::vector<int> random_connected_set(const Network& net, int size, padmm::Rng& rng) {
  std::vector<int> set{static_cast<int>(rng.uniform_index(net.node_count()))};
  while (static_cast<int>(set.size()) < size) {
    std::vector<int> fringe;
    for (int p : set)
      for (int q : net.neighbors(p))
        if (std::find(set.begin(), set.end(), q) == set.end()) fringe.push_back(q);
    if (fringe.empty()) break;
    std::sort(fringe.begin(), fringe.end());
    fringe.erase(std::unique(fringe.begin(), fringe.end()), fringe.end());
    set.push_back(fringe[rng.uniform_index(fringe.size())]);
  }
  std::sort(set.begin(), set.end());
  return set;
}

/// Connected-variable component map: each component owned by a random
/// connected set of size 1..max_owners. Every node owns at least one.
inline ComponentMap random_connected_cmap(const Network& net, int n_components, int max_owners, padmm::Rng& rng,
                                          std::vector<int> dims = {}) {
  std::vector<std::vector<int>> domains(net.node_count());
  for (int l = 0; l < n_components; ++l) {
    const int size = 1 + static_cast<int>(rng.uniform_index(max_owners));
    for (int p : random_connected_set(net, size, rng)) domains[p].push_back(l);
  }
  return ComponentMap::from_node_domains(n_components, domains, dims);
}

/// Random SPD quadratic per node over its domain.
inline padmm::ProblemSet random_quadratics(const ComponentMap& cmap, padmm::Rng& rng, double shift = 0.5) {
  padmm::ProblemSet out(cmap.node_count());
  for (int p = 0; p < cmap.node_count(); ++p) {
    const auto& dom = cmap.node_domain(p);
    if (dom.empty()) continue;
    std::vector<int> dims;
    int n = 0;
    for (int l : dom) {
      dims.push_back(cmap.dim(l));
      n += cmap.dim(l);
    }
    Eigen::MatrixXd M(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) M(i, j) = rng.normal();
    Eigen::MatrixXd E = M.transpose() * M / n + shift * Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd w(n);
    for (int i = 0; i < n; ++i) w[i] = 4.0 * rng.normal();
    out[p] = std::make_shared<padmm::QuadraticLocalProblem>(dom, dims, E, w);
  }
  return out;
}

/// Centralized minimizer of sum_p x'E_p x + w_p'x by a dense solve.
inline Eigen::VectorXd dense_minimizer(const ComponentMap& cmap, const padmm::ProblemSet& problems) {
  const int n = cmap.total_dim();
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
  for (const auto& prob : problems) {
    if (!prob) continue;
    const auto& q = dynamic_cast<const padmm::QuadraticLocalProblem&>(*prob);
    std::vector<int> idx;
    for (int l : q.domain())
      for (int k = 0; k < cmap.dim(l); ++k) idx.push_back(cmap.offset(l) + k);
    for (std::size_t a = 0; a < idx.size(); ++a) {
      g[idx[a]] += q.linear()[a];
      for (std::size_t b = 0; b < idx.size(); ++b) H(idx[a], idx[b]) += 2.0 * q.quadratic()(a, b);
    }
  }
  return H.ldlt().solve(-g);
}

/// Exact minimum Steiner tree edge count by enumerating subsets of optional
/// nodes: a tree on node set S needs |S|-1 edges iff G[S] is connected.
inline int brute_force_steiner_edges(const Network& net, const std::vector<int>& required) {
  const int n = net.node_count();
  std::vector<char> req(n, 0);
  for (int r : required) req[r] = 1;
  std::vector<int> optional;
  for (int p = 0; p < n; ++p)
    if (!req[p]) optional.push_back(p);
  int best = std::numeric_limits<int>::max();
  const int k = static_cast<int>(optional.size());
  for (std::uint32_t mask = 0; mask < (1u << k); ++mask) {
    std::vector<char> in(req);
    int size = static_cast<int>(required.size());
    for (int b = 0; b < k; ++b)
      if (mask & (1u << b)) {
        in[optional[b]] = 1;
        ++size;
      }
    if (size - 1 >= best) continue;
    int start = required.front();
    std::vector<char> seen(n, 0);
    std::queue<int> q;
    q.push(start);
    seen[start] = 1;
    int count = 1;
    while (!q.empty()) {
      int p = q.front();
      q.pop();
      for (int nb : net.neighbors(p))
        if (in[nb] && !seen[nb]) {
          seen[nb] = 1;
          ++count;
          q.push(nb);
        }
    }
    if (count == size) best = size - 1;
  }
  return best;
}

}  // namespace fixtures

namespace fixtures {

/// Projection onto {b'y = d, lo <= y <= hi} by enumerating every
/// (lower, upper, free) assignment and keeping the KKT point. n <= 8.
inline Eigen::VectorXd brute_force_projection(const Eigen::VectorXd& y0, const Eigen::VectorXd& b, double d,
                                              const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  const int n = static_cast<int>(y0.size());
  int total = 1;
  for (int i = 0; i < n; ++i) total *= 3;
  Eigen::VectorXd best;
  double best_dist = std::numeric_limits<double>::infinity();
  for (int code = 0; code < total; ++code) {
    std::vector<int> state(n);
    int c = code;
    for (int i = 0; i < n; ++i) {
      state[i] = c % 3;
      c /= 3;
    }
    // Free coordinates: y_i = y0_i - mu b_i; solve for mu.
    double num = -d, den = 0;
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      if (state[i] == 0) {
        y[i] = lo[i];
        num += b[i] * lo[i];
      } else if (state[i] == 1) {
        y[i] = hi[i];
        num += b[i] * hi[i];
      } else {
        num += b[i] * y0[i];
        den += b[i] * b[i];
      }
    }
    double mu = 0;
    if (den > 0) {
      mu = num / den;
    } else if (std::abs(num) > 1e-9) {
      continue;
    }
    for (int i = 0; i < n; ++i)
      if (state[i] == 2) y[i] = y0[i] - mu * b[i];
    // Primal feasibility.
    bool ok = std::abs(b.dot(y) - d) < 1e-9;
    for (int i = 0; i < n && ok; ++i) ok = y[i] >= lo[i] - 1e-12 && y[i] <= hi[i] + 1e-12;
    if (!ok) continue;
    const double dist = (y - y0).squaredNorm();
    if (dist < best_dist) {
      best_dist = dist;
      best = y;
    }
  }
  return best;
}

/// Projected gradient with a small fixed step; slow but simple.
template <class Grad, class Proj>
Eigen::VectorXd tiny_step_projected_gradient(Grad grad, Proj proj, Eigen::VectorXd x, double step, int iters) {
  x = proj(x);
  for (int k = 0; k < iters; ++k) x = proj(x - step * grad(x));
  return x;
}

/// MPC cost from scalar loops over the explicit state trajectory; an
/// oracle for the condensed form. u is ordered like the component map.
inline double mpc_rollout_cost(const padmm::MpcSystem& sys, const Eigen::VectorXd& u) {
  const int P = sys.node_count(), T = sys.horizon;
  std::vector<int> off(P + 1, 0);
  for (int j = 0; j < P; ++j) off[j + 1] = off[j] + sys.nodes[j].input_dim() * T;
  double cost = 0;
  for (int p = 0; p < P; ++p) {
    const padmm::MpcNode& nd = sys.nodes[p];
    const int n = nd.state_dim(), m = nd.input_dim();
    std::vector<double> x(nd.x0.data(), nd.x0.data() + n);
    for (int t = 0; t <= T; ++t) {
      const Eigen::MatrixXd& Q = t < T ? nd.Qbar : nd.Qf;
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) cost += x[a] * Q(a, b) * x[b];
      if (t == T) break;
      for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) cost += u[off[p] + t * m + a] * nd.Rbar(a, b) * u[off[p] + t * m + b];
      std::vector<double> next(n, 0.0);
      for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) next[a] += nd.A(a, b) * x[b];
        for (std::size_t k = 0; k < nd.omega.size(); ++k) {
          const int j = nd.omega[k], mj = sys.nodes[j].input_dim();
          for (int b = 0; b < mj; ++b) next[a] += nd.B[k](a, b) * u[off[j] + t * mj + b];
        }
      }
      x = next;
    }
  }
  return cost;
}

/// Small MPC system with random PSD state weights and PD input weights,
/// so the identity defaults are not baked into an oracle comparison.
inline padmm::MpcSystem random_mpc_system(const Network& net, padmm::CouplingPattern pattern, padmm::Rng& rng,
                                          int horizon) {
  const padmm::MpcDims dims{1 + static_cast<int>(rng.uniform_index(3)), 1 + static_cast<int>(rng.uniform_index(2)),
                            horizon};
  const std::uint64_t coupling_seed = rng.next_u64(), system_seed = rng.next_u64();
  padmm::MpcSystem sys = padmm::generate_systems(net, padmm::generate_couplings(net, pattern, 2, coupling_seed),
                                                 padmm::Stability::unstable, dims, system_seed);
  auto random_matrix = [&](int n) {
    Eigen::MatrixXd M(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) M(i, j) = 2.0 * rng.uniform01() - 1.0;
    return M;
  };
  for (padmm::MpcNode& nd : sys.nodes) {
    const int n = nd.state_dim(), m = nd.input_dim();
    const Eigen::MatrixXd G = random_matrix(n), H = random_matrix(m);
    nd.Qbar = G * G.transpose();
    nd.Qf = nd.Qbar + Eigen::MatrixXd::Identity(n, n);
    nd.Rbar = H * H.transpose() + Eigen::MatrixXd::Identity(m, m);
  }
  return sys;
}

}  // namespace fixtures
