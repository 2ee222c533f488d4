#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "padmm/engine.hpp"
#include "padmm/reference_admm.hpp"
#include "padmm/steiner.hpp"

using namespace padmm;

namespace {

std::shared_ptr<QuadraticLocalProblem> scalar_quad(int component, double a) {
  // (x - a)^2 = x^2 - 2a x + const
  return std::make_shared<QuadraticLocalProblem>(std::vector<int>{component}, std::vector<int>{1},
                                                 Eigen::MatrixXd::Constant(1, 1, 1.0),
                                                 Eigen::VectorXd::Constant(1, -2.0 * a));
}

double sum_of_duals(const CopyState& s, int l) {
  double acc = 0.0;
  for (const CopySlot& slot : s.layout().slots())
    if (slot.component == l) acc += s.gamma.segment(slot.offset, slot.dim).sum();
  return acc;
}

}  // namespace

TEST_CASE("quadratic local problem") {
  auto f = scalar_quad(0, 1.0);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(1), w = Eigen::VectorXd::Constant(1, 2.0);
  CHECK(f->solve(v, w)[0] == doctest::Approx(0.5));

  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_index(6));
    Eigen::MatrixXd M = Eigen::MatrixXd::NullaryExpr(n, n, [&] { return rng.normal(); });
    Eigen::MatrixXd E = M.transpose() * M + 0.1 * Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd wl = Eigen::VectorXd::NullaryExpr(n, [&] { return rng.normal(); });
    Eigen::VectorXd vv = Eigen::VectorXd::NullaryExpr(n, [&] { return rng.normal(); });
    Eigen::VectorXd weights = Eigen::VectorXd::NullaryExpr(n, [&] { return rng.uniform01(); });
    std::vector<int> dom(n), dims(n, 1);
    for (int i = 0; i < n; ++i) dom[i] = i;
    QuadraticLocalProblem q(dom, dims, E, wl);
    Eigen::VectorXd x = q.solve(vv, weights);
    // Stationarity oracle: full-pivot LU of the gradient system.
    Eigen::MatrixXd H = 2 * E;
    H.diagonal() += weights;
    Eigen::VectorXd ref = H.fullPivLu().solve(-(wl + vv));
    REQUIRE((x - ref).lpNorm<Eigen::Infinity>() < 1e-10);
  }
  CHECK_THROWS_AS(QuadraticLocalProblem({0, 1}, {1}, Eigen::MatrixXd::Identity(1, 1), Eigen::VectorXd::Zero(1)),
                  std::invalid_argument);
  QuadraticLocalProblem indefinite({0}, {1}, Eigen::MatrixXd::Constant(1, 1, -1.0), Eigen::VectorXd::Zero(1));
  CHECK_THROWS_AS(indefinite.solve(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)), SolverError);
}

TEST_CASE("v and dual update formulas") {
  auto net = fixtures::path(3);
  auto col = greedy_color(net);  // 0:0, 1:1, 2:0
  auto cmap = ComponentMap::global(3, 1);
  CopyState s(std::make_shared<const ConsensusLayout>(net, cmap));

  // One larger-colored neighbor holding 3, rho = 2.
  auto two = Network::from_edges(2, {{0, 1}});
  auto cm2 = ComponentMap::global(2, 1);
  CopyState s2(std::make_shared<const ConsensusLayout>(two, cm2));
  auto col2 = greedy_color(two);
  s2.x_prev[1] = 3.0;
  CHECK(compute_v_alg1(s2, col2, 0, 0, 2.0)[0] == doctest::Approx(-6.0));

  // Middle node, both neighbors hold 1.0, gamma = 0.5.
  s.x << 1.0, 0.0, 1.0;
  s.x_prev = s.x;
  s.gamma[1] = 0.5;
  CHECK(compute_v_alg1(s, col, 1, 0, 1.0)[0] == doctest::Approx(-1.5));

  // Singleton component: v = gamma = 0.
  auto single = ComponentMap::from_node_domains(1, {{0}, {}, {}});
  CopyState s3(std::make_shared<const ConsensusLayout>(net, single));
  CHECK(compute_v_alg1(s3, col, 0, 0, 1.0)[0] == 0.0);
  CHECK_THROWS_AS(compute_v_alg1(s3, col, 1, 0, 1.0), GraphError);

  // Dual: own 2, neighbor 0, rho 1.
  s2.x << 2.0, 0.0;
  CHECK(dual_update_alg1(s2, 0, 0, 1.0)[0] == doctest::Approx(2.0));
  CHECK(dual_update_alg2(s2, 0, 0, 1.0)[0] == doctest::Approx(1.0));
  s2.x << 4.0, 4.0;
  CHECK(dual_update_alg1(s2, 0, 0, 1.0)[0] == 0.0);

  // Algorithm 2 v: gamma - rho/2 (D x_p + sum x_j), from the snapshot.
  s.x_prev << 1.0, 2.0, 5.0;
  s.gamma.setZero();
  s.gamma[1] = 0.25;
  CHECK(compute_v_alg2(s, 1, 0, 2.0)[0] == doctest::Approx(0.25 - 1.0 * (2 * 2.0 + 1.0 + 5.0)));
  CHECK(compute_v_alg2(s, 0, 0, 2.0)[0] == doctest::Approx(0.0 - 1.0 * (1.0 + 2.0)));
}

TEST_CASE("local_solve handles copies outside the domain in closed form") {
  auto net = fixtures::path(3);
  auto cmap = ComponentMap::global(3, 2);
  ConsensusLayout layout(net, cmap);
  auto f = scalar_quad(1, 1.0);
  Eigen::VectorXd v(2);
  v << 3.0, 0.0;
  // Node 1 has D = 2 on both components.
  Eigen::VectorXd x = local_solve(layout, 1, f.get(), v, 1.0);
  CHECK(x[0] == doctest::Approx(-1.5));
  CHECK(x[1] == doctest::Approx(0.5));  // argmin (x-1)^2 + x^2
  Eigen::VectorXd z = local_solve(layout, 0, nullptr, v, 2.0);
  CHECK(z[0] == doctest::Approx(-1.5));  // D = 1
}

TEST_CASE("two-node consensus reaches the minimizer of the sum") {
  auto net = Network::from_edges(2, {{0, 1}});
  auto cmap = ComponentMap::global(2, 1);
  ProblemSet probs{scalar_quad(0, 1.0), scalar_quad(0, 3.0)};
  EngineConfig cfg;
  cfg.rho = 1.0;
  cfg.max_cs = 500;
  Eigen::VectorXd ref = Eigen::VectorXd::Constant(1, 2.0);
  auto r1 = run_algorithm1(net, greedy_color(net), cmap, probs, cfg, ref);
  CHECK(r1.trace.status == RunStatus::converged);
  CHECK(r1.state.copy(0, 0)[0] == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(r1.state.copy(1, 0)[0] == doctest::Approx(2.0).epsilon(1e-8));
  auto r2 = run_algorithm2(net, cmap, probs, cfg, ref);
  CHECK(r2.trace.status == RunStatus::converged);
  CHECK(r2.state.copy(1, 0)[0] == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(r1.trace.records.front().payload == 2);
}

TEST_CASE("Steiner relay on a path") {
  auto net = fixtures::path(3);
  auto cmap = ComponentMap::from_node_domains(1, {{0}, {}, {0}});
  ProblemSet probs{scalar_quad(0, 1.0), nullptr, scalar_quad(0, 3.0)};
  EngineConfig cfg;
  cfg.max_cs = 2000;
  auto col = greedy_color(net);
  CHECK_THROWS_AS(run_algorithm1(net, col, cmap, probs, cfg), GraphError);
  auto r = run_algorithm3(net, col, cmap, probs, cfg, Eigen::VectorXd::Constant(1, 2.0));
  for (int p = 0; p < 3; ++p) CHECK(r.state.copy(p, 0)[0] == doctest::Approx(2.0).epsilon(1e-7));
  CHECK(r.state.layout().slot(r.state.layout().find_or_throw(1, 0)).steiner);
  CHECK(r.trace.records.front().payload == 3);
}

TEST_CASE("Algorithm 3 on a connected variable equals Algorithm 1") {
  Rng rng(8);
  auto net = fixtures::random_connected(9, 0.2, rng);
  auto cmap = fixtures::random_connected_cmap(net, 6, 4, rng);
  auto probs = fixtures::random_quadratics(cmap, rng);
  auto col = greedy_color(net);
  EngineConfig cfg;
  cfg.max_cs = 40;
  cfg.tolerance = 0;
  auto a = run_algorithm1(net, col, cmap, probs, cfg);
  auto b = run_algorithm3(net, col, cmap, probs, cfg);
  CHECK(a.state.x == b.state.x);
  CHECK(a.state.gamma == b.state.gamma);
}

TEST_CASE("property: Algorithm 1 matches the Extended ADMM reference") {
  Rng rng(99);
  for (int trial = 0; trial < 12; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_index(7));
    auto net = fixtures::random_connected(n, 0.3, rng);
    const bool vector_dims = trial % 3 == 2;
    const int comps = 1 + static_cast<int>(rng.uniform_index(6));
    std::vector<int> dims;
    if (vector_dims)
      for (int l = 0; l < comps; ++l) dims.push_back(1 + static_cast<int>(rng.uniform_index(3)));
    auto cmap = fixtures::random_connected_cmap(net, comps, n, rng, dims);
    auto probs = fixtures::random_quadratics(cmap, rng);
    auto col = greedy_color(net);
    const double rho = 0.3 + 2.0 * rng.uniform01();
    EngineConfig cfg;
    cfg.rho = rho;
    ConsensusEngine engine(net, cmap, probs, cfg, Scheme::color_sweep, col);
    ExtendedAdmmReference ref(net, col, cmap, probs, rho);
    for (int k = 0; k < 50; ++k) {
      engine.iterate();
      ref.iterate();
      REQUIRE((engine.state().x - ref.copies()).lpNorm<Eigen::Infinity>() <= 1e-9);
      for (const CopySlot& s : engine.layout().slots()) {
        Eigen::VectorXd gamma = Eigen::VectorXd::Zero(s.dim);
        for (int nb : s.neighbors) {
          const int j = engine.layout().slot(nb).node;
          gamma += (j > s.node ? 1.0 : -1.0) * ref.edge_dual(s.component, s.node, j);
          REQUIRE((ref.directed_dual(s.component, j, s.node) + ref.directed_dual(s.component, s.node, j))
                      .lpNorm<Eigen::Infinity>() == 0.0);
        }
        REQUIRE((gamma - engine.state().gamma.segment(s.offset, s.dim)).lpNorm<Eigen::Infinity>() <= 1e-9);
      }
    }
  }
}

TEST_CASE("property: dual conservation and convergence for all schemes") {
  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 4 + static_cast<int>(rng.uniform_index(16));
    auto net = fixtures::random_connected(n, 0.1, rng);
    std::vector<std::vector<int>> domains(n);
    const int comps = 3 + static_cast<int>(rng.uniform_index(6));
    for (int l = 0; l < comps; ++l) {
      bool any = false;
      for (int p = 0; p < n; ++p)
        if (rng.uniform01() < 0.3) {
          domains[p].push_back(l);
          any = true;
        }
      if (!any) domains[rng.uniform_index(n)].push_back(l);
    }
    auto cmap = ComponentMap::from_node_domains(comps, domains);
    auto probs = fixtures::random_quadratics(cmap, rng, 1.0);
    auto col = greedy_color(net);
    const Eigen::VectorXd xstar = fixtures::dense_minimizer(cmap, probs);
    auto aug = steiner_preprocess(net, cmap);
    EngineConfig cfg;
    cfg.rho = 1.0;
    cfg.max_cs = 3000;
    cfg.tolerance = 1e-12;
    for (Scheme scheme : {Scheme::color_sweep, Scheme::parallel}) {
      ConsensusEngine engine(net, aug, probs, cfg, scheme, col);
      for (int k = 0; k < 30; ++k) {
        engine.iterate();
        for (int l = 0; l < comps; ++l) REQUIRE(std::abs(sum_of_duals(engine.state(), l)) < 1e-9);
      }
      auto res = drive(engine, xstar);
      CHECK(res.trace.records.back().relative_error < 1e-6);
    }
  }
}

TEST_CASE("fixed point: a converged state does not move") {
  Rng rng(21);
  auto net = fixtures::random_connected(8, 0.3, rng);
  auto cmap = fixtures::random_connected_cmap(net, 5, 5, rng);
  auto probs = fixtures::random_quadratics(cmap, rng, 1.0);
  EngineConfig cfg;
  cfg.max_cs = 5000;
  cfg.tolerance = 1e-13;
  for (Scheme scheme : {Scheme::color_sweep, Scheme::parallel}) {
    ConsensusEngine engine(net, cmap, probs, cfg, scheme, greedy_color(net));
    auto res = drive(engine, std::nullopt);
    REQUIRE(res.trace.status == RunStatus::converged);
    const Eigen::VectorXd before = engine.state().x;
    engine.iterate();
    CHECK((engine.state().x - before).lpNorm<Eigen::Infinity>() < 1e-10);
  }
}

TEST_CASE("bipartite network converges") {
  // 10-node even cycle with chords between the two sides.
  std::vector<std::pair<int, int>> e;
  for (int i = 0; i < 10; ++i) e.emplace_back(i, (i + 1) % 10);
  e.emplace_back(0, 5);
  e.emplace_back(2, 7);
  auto net = Network::from_edges(10, e);
  auto col = greedy_color(net);
  REQUIRE(col.num_colors() == 2);
  Rng rng(4);
  auto cmap = fixtures::random_connected_cmap(net, 12, 6, rng);
  auto probs = fixtures::random_quadratics(cmap, rng, 1.0);
  auto xstar = fixtures::dense_minimizer(cmap, probs);
  EngineConfig cfg;
  cfg.max_cs = 2000;
  cfg.tolerance = 0;
  cfg.target_error = 1e-9;
  auto r = run_algorithm1(net, col, cmap, probs, cfg, xstar);
  CHECK(r.trace.records.back().relative_error < 1e-8);
}

TEST_CASE("global mode payload and thread determinism") {
  Rng rng(6);
  auto net = fixtures::random_connected(12, 0.2, rng);
  auto cmap = fixtures::random_connected_cmap(net, 7, 4, rng);
  auto probs = fixtures::random_quadratics(cmap, rng);
  auto global = ComponentMap::global(12, 7);
  ConsensusLayout layout(net, global);
  CHECK(layout.payload_per_cs() == 7 * 12);
  int expect = 0;
  for (int p = 0; p < 12; ++p) expect += static_cast<int>(cmap.node_domain(p).size());
  CHECK(ConsensusLayout(net, cmap).payload_per_cs() == expect);

  auto col = greedy_color(net);
  EngineConfig cfg;
  cfg.max_cs = 60;
  cfg.tolerance = 0;
  auto a = run_algorithm1(net, col, global, probs, cfg);
  cfg.threads = 4;
  auto b = run_algorithm1(net, col, global, probs, cfg);
  CHECK(a.state.x == b.state.x);
  auto c = run_algorithm2(net, global, probs, cfg);
  cfg.threads = 1;
  auto d = run_algorithm2(net, global, probs, cfg);
  CHECK(c.state.x == d.state.x);
}

TEST_CASE("relative error definition") {
  auto net = Network::from_edges(2, {{0, 1}});
  auto cmap = ComponentMap::global(2, 1);
  CopyState s(std::make_shared<const ConsensusLayout>(net, cmap));
  Eigen::VectorXd ref = Eigen::VectorXd::Constant(1, 2.0);
  s.x << 2.0, 2.0;
  CHECK(relative_error(s, ref) == 0.0);
  s.x << 1.0, 3.0;
  CHECK(relative_error(s, ref) == doctest::Approx(0.5));
  auto single = ComponentMap::from_node_domains(1, {{0}, {}});
  CopyState s1(std::make_shared<const ConsensusLayout>(net, single));
  s1.x << 1.1;
  CHECK(relative_error(s1, Eigen::VectorXd::Constant(1, 1.0)) == doctest::Approx(0.1));
  CHECK_THROWS_AS(relative_error(s1, Eigen::VectorXd::Zero(1)), std::invalid_argument);
}

TEST_CASE("engine config validation") {
  EngineConfig cfg;
  cfg.rho = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.rho = 1;
  cfg.max_cs = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("per-color block Gram matrices are diagonal") {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_index(10));
    auto net = fixtures::random_connected(n, 0.3, rng);
    auto cmap = fixtures::random_connected_cmap(net, 4, n, rng, {1, 2, 1, 3});
    auto col = greedy_color(net);
    ExtendedAdmmReference ref(net, col, cmap, fixtures::random_quadratics(cmap, rng), 1.0);
    for (int l = 0; l < 4; ++l) {
      if (cmap.owners(l).size() < 2) continue;
      for (int c = 0; c < col.num_colors(); ++c) {
        Eigen::MatrixXd g = ref.block_gram(l, c);
        Eigen::MatrixXd off = g;
        off.diagonal().setZero();
        REQUIRE(off.lpNorm<Eigen::Infinity>() == 0.0);
        if (g.size() > 0) REQUIRE(g.diagonal().minCoeff() > 0.0);
      }
    }
  }
}
