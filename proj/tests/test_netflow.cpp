#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "padmm/netflow.hpp"
#include "padmm/projection.hpp"

using namespace padmm;

namespace {

FlowInstance hand_instance(int P, std::vector<Arc> arcs, std::vector<std::int64_t> cents, FlowKind kind) {
  FlowInstance inst;
  inst.node_count = P;
  inst.kind = kind;
  inst.arcs = std::move(arcs);
  inst.supply_cents = std::move(cents);
  for (auto c : inst.supply_cents) inst.supply.push_back(static_cast<double>(c) / 100.0);
  inst.validate();
  return inst;
}

Eigen::VectorXd random_vec(Rng& rng, int n, double scale = 1.0) {
  return Eigen::VectorXd::NullaryExpr(n, [&] { return scale * rng.normal(); });
}

}  // namespace

TEST_CASE("projection examples") {
  Eigen::VectorXd b(2), lo = Eigen::VectorXd::Zero(2), hi = Eigen::VectorXd::Ones(2);
  b << 1, 1;
  auto y = project_box_hyperplane(Eigen::VectorXd::Zero(2), b, 1.0, lo, hi);
  CHECK(y[0] == doctest::Approx(0.5));
  CHECK(y[1] == doctest::Approx(0.5));
  Eigen::VectorXd feas(2);
  feas << 0.3, 0.7;
  CHECK((project_box_hyperplane(feas, b, 1.0, lo, hi) - feas).norm() < 1e-14);
  CHECK_THROWS_AS(project_box_hyperplane(feas, b, 3.0, lo, hi), SolverError);
}

TEST_CASE("property: projection matches active-set enumeration and is non-expansive") {
  Rng rng(31);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_index(6));
    Eigen::VectorXd b(n), lo(n), hi(n);
    for (int i = 0; i < n; ++i) {
      b[i] = rng.uniform01() < 0.5 ? -1.0 : 1.0;
      if (trial % 2) b[i] *= 0.5 + rng.uniform01();
      lo[i] = rng.uniform01() < 0.7 ? 0.0 : -rng.uniform01();
      hi[i] = lo[i] + 0.1 + 3 * rng.uniform01();
    }
    Eigen::VectorXd inside = lo + (hi - lo).cwiseProduct(Eigen::VectorXd::NullaryExpr(n, [&] { return rng.uniform01(); }));
    const double d = b.dot(inside);
    Eigen::VectorXd u = random_vec(rng, n, 3.0), w = random_vec(rng, n, 3.0);
    auto pu = project_box_hyperplane(u, b, d, lo, hi);
    auto pw = project_box_hyperplane(w, b, d, lo, hi);
    REQUIRE((pu - fixtures::brute_force_projection(u, b, d, lo, hi)).lpNorm<Eigen::Infinity>() < 1e-8);
    REQUIRE(std::abs(b.dot(pu) - d) < 1e-10);
    REQUIRE((pu - pw).norm() <= (u - w).norm() + 1e-12);
  }
}

TEST_CASE("SPG on a box-hyperplane quadratic") {
  Rng rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_index(5));
    Eigen::VectorXd diag = Eigen::VectorXd::NullaryExpr(n, [&] { return 0.5 + 3 * rng.uniform01(); });
    Eigen::VectorXd c = random_vec(rng, n, 2.0);
    Eigen::VectorXd b = Eigen::VectorXd::Ones(n), lo = Eigen::VectorXd::Zero(n), hi = Eigen::VectorXd::Constant(n, 2.0);
    const double d = 1.0;
    auto f = [&](const Eigen::VectorXd& x) { return 0.5 * x.dot(diag.cwiseProduct(x)) - c.dot(x); };
    auto g = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return diag.cwiseProduct(x) - c; };
    auto proj = [&](const Eigen::VectorXd& x) { return project_box_hyperplane(x, b, d, lo, hi); };
    SpgOptions opts;
    opts.record = true;
    auto r = spg_minimize(f, g, proj, Eigen::VectorXd::Zero(n), opts);
    REQUIRE(r.converged);
    for (const auto& s : r.steps) REQUIRE(s.f_new <= s.f_ref + 1e-4 * s.lambda * s.directional + 1e-15);
    auto slow = fixtures::tiny_step_projected_gradient(g, proj, Eigen::VectorXd::Zero(n), 0.05, 20000);
    CHECK((r.x - slow).lpNorm<Eigen::Infinity>() < 1e-7);
  }
}

TEST_CASE("flow generator") {
  auto two = Network::from_edges(2, {{0, 1}});
  auto z = generate_flow_instance(two, 0, 1, FlowKind::quadratic);
  CHECK(z.supply == std::vector<double>{0.0, 0.0});
  auto one = generate_flow_instance(two, 1, 5, FlowKind::quadratic);
  const Arc& arc = one.arcs[0];
  CHECK(one.supply[arc.tail] == -one.supply[arc.head]);
  CHECK(one.supply[arc.tail] < 0);

  auto net = generate_barabasi_albert(200, 2, 3);
  auto inst = generate_flow_instance(net, 20, 9, FlowKind::delay);
  CHECK(inst.arcs.size() == 396);
  std::int64_t total = 0;
  for (auto c : inst.supply_cents) total += c;
  CHECK(total == 0);
  for (const Arc& a : inst.arcs) {
    const double w = a.weight;
    CHECK((w == 10 || w == 20 || w == 30 || w == 40 || w == 50 || w == 100));
    CHECK(net.has_edge(a.tail, a.head));
  }
  CHECK_NOTHROW(inst.validate());
  auto again = generate_flow_instance(net, 20, 9, FlowKind::delay);
  CHECK(serialize(again) == serialize(inst));
  CHECK(inst.component_map().owners(0).size() == 2);

  auto back = parse_flow_instance(serialize(inst));
  CHECK(serialize(back) == serialize(inst));
  CHECK(back.supply == inst.supply);
  CHECK_THROWS_AS(parse_flow_instance("flow 2 1 quadratic 0\narc 0 1 x\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_flow_kind("linear"), std::invalid_argument);

  // Weight frequencies.
  Rng rng(1);
  std::map<double, int> counts;
  for (int i = 0; i < 20000; ++i) ++counts[draw_flow_weight(rng)];
  CHECK(counts[10] == doctest::Approx(4000).epsilon(0.06));
  CHECK(counts[100] == doctest::Approx(2000).epsilon(0.08));
}

TEST_CASE("quadratic local solve matches the KKT system") {
  // Degree-1 node: the constraint pins the value.
  auto two = hand_instance(2, {{0, 1, 5.0}}, {-100, 100}, FlowKind::quadratic);
  FlowLocalProblem p0(two, 0);
  Eigen::VectorXd v = Eigen::VectorXd::Constant(1, 0.3), w = Eigen::VectorXd::Constant(1, 2.0);
  CHECK(p0.solve(v, w)[0] == doctest::Approx(1.0));

  Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    auto net = fixtures::random_connected(6, 0.4, rng);
    auto inst = generate_flow_instance(net, 3, trial, FlowKind::quadratic);
    const int p = static_cast<int>(rng.uniform_index(6));
    FlowLocalProblem prob(inst, p);
    const int n = static_cast<int>(prob.domain().size());
    Eigen::VectorXd vv = random_vec(rng, n), ww = Eigen::VectorXd::NullaryExpr(n, [&] { return 0.1 + rng.uniform01(); });
    Eigen::VectorXd y = prob.solve(vv, ww);
    // Dense KKT: [diag(1/2 + w) b; b' 0][y; mu] = [a/2 - v; d]
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + 1, n + 1);
    Eigen::VectorXd rhs(n + 1);
    for (int i = 0; i < n; ++i) {
      K(i, i) = 0.5 + ww[i];
      K(i, n) = K(n, i) = prob.signs()[i];
      rhs[i] = 0.5 * prob.params()[i] - vv[i];
    }
    rhs[n] = prob.demand();
    Eigen::VectorXd sol = K.fullPivLu().solve(rhs);
    REQUIRE((y - sol.head(n)).lpNorm<Eigen::Infinity>() < 1e-10);
  }
  // Degree-2 node, symmetric data.
  auto path = hand_instance(3, {{0, 1, 1.0}, {1, 2, 1.0}}, {0, 0, 0}, FlowKind::quadratic);
  FlowLocalProblem mid(path, 1);
  Eigen::VectorXd y = mid.solve(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Constant(2, 2.0));
  CHECK(y[0] == doctest::Approx(y[1]));
  CHECK(y[0] == doctest::Approx(0.2));  // (1/2)/(1/2 + 2)
}

TEST_CASE("delay local solve") {
  Rng rng(14);
  for (int trial = 0; trial < 60; ++trial) {
    auto net = fixtures::random_connected(6, 0.4, rng);
    auto inst = generate_flow_instance(net, 4, 100 + trial, FlowKind::delay);
    const int p = static_cast<int>(rng.uniform_index(6));
    FlowLocalProblem prob(inst, p);
    const int n = static_cast<int>(prob.domain().size());
    Eigen::VectorXd v = random_vec(rng, n, 0.2), w = Eigen::VectorXd::NullaryExpr(n, [&] { return 0.05 + rng.uniform01(); });
    Eigen::VectorXd y = prob.solve(v, w);
    REQUIRE(std::abs(prob.signs().dot(y) - prob.demand()) < 1e-10);
    REQUIRE((y.array() >= 0).all());
    REQUIRE((y.array() < prob.params().array()).all());
    const Eigen::VectorXd c = prob.params();
    auto grad = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
      return (0.5 * c.array() / (c.array() - x.array()).square() + v.array() + w.array() * x.array()).matrix();
    };
    auto proj = [&](const Eigen::VectorXd& x) {
      return project_box_hyperplane(x, prob.signs(), prob.demand(), Eigen::VectorXd::Zero(n), c * (1 - kDelayEpsilon));
    };
    // Curvature is at most 1/c^2 + w on the relevant region; step below 1/L.
    auto slow = fixtures::tiny_step_projected_gradient(grad, proj, y * 0.5, 0.5, 20000);
    REQUIRE((y - slow).lpNorm<Eigen::Infinity>() < 1e-6);
  }

  // Interior stationary point: pick y*, then v from the gradient condition with mu = 0.
  auto two = hand_instance(2, {{0, 1, 10.0}}, {-300, 300}, FlowKind::delay);
  FlowLocalProblem head(two, 1);
  const double c = 10.0, ystar = 3.0, wv = 0.4;
  const double v = -(0.5 * c / ((c - ystar) * (c - ystar)) + wv * ystar);
  Eigen::VectorXd y = head.solve(Eigen::VectorXd::Constant(1, v), Eigen::VectorXd::Constant(1, wv));
  CHECK(y[0] == doctest::Approx(ystar).epsilon(1e-12));
}

TEST_CASE("centralized references") {
  // Circulation: a directed triangle with equal a has Ba = 0, so x* = a when d = 0.
  auto tri = hand_instance(3, {{0, 1, 7.0}, {1, 2, 7.0}, {2, 0, 7.0}}, {0, 0, 0}, FlowKind::quadratic);
  auto sorted = tri;
  std::sort(sorted.arcs.begin(), sorted.arcs.end(), [](const Arc& a, const Arc& b) {
    return std::tie(a.tail, a.head) < std::tie(b.tail, b.head);
  });
  auto x = centralized_flow_reference(sorted);
  CHECK((x.array() - 7.0).abs().maxCoeff() < 1e-12);

  auto net = generate_barabasi_albert(60, 2, 4);
  auto q = generate_flow_instance(net, 10, 3, FlowKind::quadratic);
  auto xq = centralized_flow_reference(q);
  CHECK(q.conservation_residual(xq) < 1e-10);
  // Stationarity: x - a = -B' mu for some mu, i.e. x - a is orthogonal to cycles; check via projection.
  Eigen::VectorXd a(q.arcs.size());
  for (std::size_t i = 0; i < q.arcs.size(); ++i) a[i] = q.arcs[i].weight;
  Eigen::MatrixXd B = Eigen::MatrixXd(q.incidence());
  Eigen::VectorXd mu = (B * B.transpose()).completeOrthogonalDecomposition().solve(B * (a - xq));
  CHECK((a - xq - B.transpose() * mu).lpNorm<Eigen::Infinity>() < 1e-9);

  auto dl = generate_flow_instance(net, 10, 3, FlowKind::delay);
  auto xd = centralized_flow_reference(dl);
  CHECK(dl.conservation_residual(xd) < 1e-11);
  CHECK((xd.array() >= 0).all());
  // Optimality: no feasible perturbation along a random cycle-space direction improves it.
  const double fstar = dl.objective(xd);
  Rng rng(3);
  for (int k = 0; k < 50; ++k) {
    Eigen::VectorXd dir = random_vec(rng, static_cast<int>(dl.arcs.size()));
    Eigen::VectorXd nmu = (B * B.transpose()).completeOrthogonalDecomposition().solve(B * dir);
    dir -= B.transpose() * nmu;  // now B dir = 0
    for (double t : {1e-3, -1e-3}) {
      Eigen::VectorXd trial = xd + t * dir;
      if ((trial.array() < 0).any()) continue;
      CHECK(dl.objective(trial) >= fstar - 1e-12);
    }
  }

  // Relaxing capacities never increases the optimum.
  auto relaxed = dl;
  for (auto& arc : relaxed.arcs) arc.weight *= 1.1;
  CHECK(relaxed.objective(centralized_flow_reference(relaxed)) <= fstar + 1e-12);
}

TEST_CASE("Nesterov dual baseline") {
  auto two = hand_instance(2, {{0, 1, 5.0}}, {-100, 100}, FlowKind::quadratic);
  NesterovConfig cfg;
  cfg.max_cs = 200;
  cfg.target_error = 1e-10;
  auto trace = nesterov_dual_baseline(two, cfg, Eigen::VectorXd::Constant(1, 1.0));
  CHECK(trace.status == RunStatus::converged);
  CHECK(trace.records.front().payload == 2);

  // Dual gradient at zero: B a - d.
  auto x0 = flow_primal_from_dual(two, Eigen::VectorXd::Zero(2));
  CHECK(x0[0] == 5.0);
  CHECK(two.conservation_residual(x0) == doctest::Approx(4.0));

  auto net = generate_barabasi_albert(30, 2, 2);
  auto inst = generate_flow_instance(net, 5, 2, FlowKind::quadratic);
  Eigen::MatrixXd B = Eigen::MatrixXd(inst.incidence());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(B * B.transpose());
  CHECK(flow_dual_lipschitz(inst) == doctest::Approx(es.eigenvalues().maxCoeff()).epsilon(1e-8));
  CHECK(flow_dual_lipschitz(inst) >= es.eigenvalues().maxCoeff());

  auto dl = generate_flow_instance(net, 5, 2, FlowKind::delay);
  CHECK_THROWS_AS(nesterov_dual_baseline(dl, NesterovConfig{}, std::nullopt), std::invalid_argument);
}

TEST_CASE("Algorithm 1 on flows: feasibility, copy agreement, references") {
  auto net = generate_barabasi_albert(40, 2, 6);
  auto col = greedy_color(net);
  for (FlowKind kind : {FlowKind::quadratic, FlowKind::delay}) {
    auto inst = generate_flow_instance(net, 6, 8, kind);
    auto xstar = centralized_flow_reference(inst);
    EngineConfig cfg;
    cfg.rho = kind == FlowKind::quadratic ? 2.0 : 0.08;
    cfg.max_cs = 6000;
    cfg.tolerance = 0;
    cfg.target_error = 1e-9;
    auto r = run_algorithm1(net, col, inst.component_map(), make_flow_problems(inst), cfg, xstar);
    CHECK(r.trace.status == RunStatus::converged);
    auto xt = arc_values(inst, r.state, true), xh = arc_values(inst, r.state, false);
    CHECK((xt - xh).lpNorm<Eigen::Infinity>() < 1e-6);
    CHECK(inst.conservation_residual(xt) < 1e-6);
    CHECK((xt - xstar).lpNorm<Eigen::Infinity>() < 1e-6 * std::max(1.0, xstar.lpNorm<Eigen::Infinity>()));
  }
}
