#include "padmm/mpc.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include "padmm/rng.hpp"

namespace padmm {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_matrix(std::ostream& out, const Eigen::MatrixXd& M) {
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index j = 0; j < M.cols(); ++j) out << ' ' << fmt17(M(i, j));
}

Eigen::MatrixXd read_matrix(std::istream& in, Eigen::Index rows, Eigen::Index cols, const char* what) {
  Eigen::MatrixXd M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      if (!(in >> M(i, j))) throw std::invalid_argument(std::string("mpc system: short ") + what + " line");
  return M;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("mpc system: " + what);
}

}  // namespace

const char* to_string(CouplingPattern p) {
  switch (p) {
    case CouplingPattern::star: return "star";
    case CouplingPattern::generic: return "generic";
    case CouplingPattern::nonconnected: return "nonconnected";
  }
  return "?";
}

CouplingPattern parse_coupling_pattern(const std::string& s) {
  if (s == "star") return CouplingPattern::star;
  if (s == "generic") return CouplingPattern::generic;
  if (s == "nonconnected") return CouplingPattern::nonconnected;
  throw std::invalid_argument("unknown coupling pattern '" + s + "'");
}

const char* to_string(Stability s) { return s == Stability::stable ? "stable" : "unstable"; }

Stability parse_stability(const std::string& s) {
  if (s == "stable") return Stability::stable;
  if (s == "unstable") return Stability::unstable;
  throw std::invalid_argument("unknown stability '" + s + "'");
}

// ---------------------------------------------------------------- couplings

Couplings generate_couplings(const Network& net, CouplingPattern pattern, int reach, std::uint64_t seed) {
  if (reach < 0) throw std::invalid_argument("generate_couplings: negative reach");
  const int P = net.node_count();
  Couplings omega(P);
  if (pattern == CouplingPattern::star) {
    for (int p = 0; p < P; ++p) {
      omega[p].assign(net.neighbors(p).begin(), net.neighbors(p).end());
      omega[p].push_back(p);
      std::sort(omega[p].begin(), omega[p].end());
    }
    return omega;
  }

  Rng rng(seed);
  for (int j = 0; j < P; ++j) {
    std::vector<char> owner(P, 0);
    std::set<int> fringe;
    auto take = [&](int q) {
      owner[q] = 1;
      fringe.erase(q);
      for (int nb : net.neighbors(q))
        if (!owner[nb]) fringe.insert(nb);
    };
    take(j);
    for (int r = 0; r < reach; ++r) {
      int pick = -1;
      if (pattern == CouplingPattern::generic) {
        if (fringe.empty()) break;
        auto it = fringe.begin();
        std::advance(it, static_cast<long>(rng.uniform_index(fringe.size())));
        pick = *it;
      } else {
        std::vector<int> cand;
        std::vector<double> weight;
        for (int q = 0; q < P; ++q)
          if (!owner[q]) {
            cand.push_back(q);
            weight.push_back(fringe.count(q) ? 2.0 : 1.0);
          }
        if (cand.empty()) break;
        pick = cand[rng.weighted_index(weight)];
      }
      take(pick);
    }
    for (int q = 0; q < P; ++q)
      if (owner[q]) omega[q].push_back(j);  // j ascending, so omega stays sorted
  }
  return omega;
}

ComponentMap coupling_map(const Couplings& omega, const std::vector<int>& input_dims, int horizon) {
  std::vector<int> dims(input_dims.size());
  for (std::size_t j = 0; j < dims.size(); ++j) dims[j] = input_dims[j] * horizon;
  return ComponentMap::from_node_domains(static_cast<int>(omega.size()), omega, dims);
}

// ---------------------------------------------------------------- systems

std::vector<int> MpcSystem::input_dims() const {
  std::vector<int> m(nodes.size());
  for (std::size_t p = 0; p < nodes.size(); ++p) m[p] = nodes[p].input_dim();
  return m;
}

ComponentMap MpcSystem::component_map() const {
  Couplings omega(nodes.size());
  for (std::size_t p = 0; p < nodes.size(); ++p) omega[p] = nodes[p].omega;
  return coupling_map(omega, input_dims(), horizon);
}

void MpcSystem::validate() const {
  require(horizon >= 1, "horizon must be positive");
  const int P = node_count();
  for (int p = 0; p < P; ++p) {
    const MpcNode& nd = nodes[p];
    const int n = nd.state_dim(), m = nd.input_dim();
    const std::string at = " at node " + std::to_string(p);
    require(n > 0 && nd.A.cols() == n, "A must be square and nonempty" + at);
    require(m > 0 && nd.Rbar.cols() == m, "Rbar must be square and nonempty" + at);
    require(nd.Qbar.rows() == n && nd.Qbar.cols() == n, "Qbar has the wrong size" + at);
    require(nd.Qf.rows() == n && nd.Qf.cols() == n, "Qf has the wrong size" + at);
    require(nd.x0.size() == n, "x0 has the wrong size" + at);
    require(std::is_sorted(nd.omega.begin(), nd.omega.end()) &&
                std::adjacent_find(nd.omega.begin(), nd.omega.end()) == nd.omega.end(),
            "Omega must be sorted without duplicates" + at);
    require(std::binary_search(nd.omega.begin(), nd.omega.end(), p), "Omega must contain the node itself" + at);
    require(nd.B.size() == nd.omega.size(), "one B block per Omega entry" + at);
    for (std::size_t k = 0; k < nd.omega.size(); ++k) {
      const int j = nd.omega[k];
      require(j >= 0 && j < P, "Omega entry out of range" + at);
      require(nd.B[k].rows() == n && nd.B[k].cols() == nodes[j].input_dim(), "B block has the wrong size" + at);
    }
    const Eigen::MatrixXd Rsym = 0.5 * (nd.Rbar + nd.Rbar.transpose());
    require(Eigen::LLT<Eigen::MatrixXd>(Rsym).info() == Eigen::Success, "Rbar must be positive definite" + at);
  }
}

MpcSystem generate_systems(const Network& net, const Couplings& omega, Stability stability, const MpcDims& dims,
                           std::uint64_t seed) {
  if (dims.state <= 0 || dims.input <= 0 || dims.horizon <= 0)
    throw std::invalid_argument("generate_systems: dimensions must be positive");
  const int P = net.node_count();
  if (static_cast<int>(omega.size()) != P) throw std::invalid_argument("generate_systems: one Omega per node");
  Rng rng(seed);
  auto normal_matrix = [&](int r, int c) {
    Eigen::MatrixXd M(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) M(i, j) = rng.normal();
    return M;
  };

  MpcSystem sys;
  sys.horizon = dims.horizon;
  sys.seed = seed;
  sys.nodes.resize(P);
  const int n = dims.state, m = dims.input;
  for (int p = 0; p < P; ++p) {
    MpcNode& nd = sys.nodes[p];
    nd.A = normal_matrix(n, n);
    if (stability == Stability::stable) {
      const double radius = Eigen::EigenSolver<Eigen::MatrixXd>(nd.A, false).eigenvalues().cwiseAbs().maxCoeff();
      if (radius > 1.0) nd.A *= 0.99 / radius;
    }
    nd.omega = omega[p];
    for (std::size_t k = 0; k < nd.omega.size(); ++k) nd.B.push_back(normal_matrix(n, m));
    nd.x0 = normal_matrix(n, 1).col(0);
    nd.Qbar = Eigen::MatrixXd::Identity(n, n);
    nd.Qf = Eigen::MatrixXd::Identity(n, n);
    nd.Rbar = Eigen::MatrixXd::Identity(m, m);
  }
  sys.validate();
  return sys;
}

double rollout_objective(const MpcSystem& sys, const Eigen::VectorXd& u) {
  const ComponentMap cmap = sys.component_map();
  if (u.size() != cmap.total_dim()) throw std::invalid_argument("rollout_objective: input vector has the wrong size");
  const int T = sys.horizon;
  auto input = [&](int j, int t) {
    const int m = sys.nodes[j].input_dim();
    return u.segment(cmap.offset(j) + t * m, m);
  };
  double cost = 0;
  for (int p = 0; p < sys.node_count(); ++p) {
    const MpcNode& nd = sys.nodes[p];
    Eigen::VectorXd x = nd.x0;
    for (int t = 0; t < T; ++t) {
      const Eigen::VectorXd up = input(p, t);
      cost += x.dot(nd.Qbar * x) + up.dot(nd.Rbar * up);
      Eigen::VectorXd next = nd.A * x;
      for (std::size_t k = 0; k < nd.omega.size(); ++k) next += nd.B[k] * input(nd.omega[k], t);
      x = std::move(next);
    }
    cost += x.dot(nd.Qf * x);
  }
  return cost;
}

// ---------------------------------------------------------------- condensation

CondensedMpc condense(const MpcSystem& sys) {
  sys.validate();
  CondensedMpc out{sys.component_map(), {}};
  const int T = sys.horizon;
  out.nodes.resize(sys.nodes.size());
  for (int p = 0; p < sys.node_count(); ++p) {
    const MpcNode& nd = sys.nodes[p];
    CondensedNode& cn = out.nodes[p];
    const int n = nd.state_dim();
    cn.domain = nd.omega;

    std::vector<int> col(nd.omega.size());
    int cols = 0, own = -1;
    for (std::size_t k = 0; k < nd.omega.size(); ++k) {
      col[k] = cols;
      cn.dims.push_back(out.cmap.dim(nd.omega[k]));
      if (nd.omega[k] == p) own = cols;
      cols += cn.dims.back();
    }

    std::vector<Eigen::MatrixXd> power{Eigen::MatrixXd::Identity(n, n)};
    for (int t = 1; t <= T; ++t) power.push_back(nd.A * power.back());

    cn.C = Eigen::MatrixXd::Zero((T + 1) * n, cols);
    for (int t = 1; t <= T; ++t)
      for (int s = 0; s < t; ++s)
        for (std::size_t k = 0; k < nd.omega.size(); ++k) {
          const Eigen::Index m = nd.B[k].cols();
          cn.C.block(t * n, col[k] + s * m, n, m) = power[t - 1 - s] * nd.B[k];
        }
    cn.D0.resize((T + 1) * n);
    for (int t = 0; t <= T; ++t) cn.D0.segment(t * n, n) = power[t] * nd.x0;

    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero((T + 1) * n, (T + 1) * n);
    for (int t = 0; t < T; ++t) Q.block(t * n, t * n, n, n) = nd.Qbar;
    Q.block(T * n, T * n, n, n) = nd.Qf;

    const Eigen::MatrixXd QC = Q * cn.C;
    cn.E = cn.C.transpose() * QC;
    const int m = nd.input_dim();
    for (int t = 0; t < T; ++t) cn.E.block(own + t * m, own + t * m, m, m) += nd.Rbar;
    cn.E = 0.5 * (cn.E + cn.E.transpose()).eval();
    cn.w = 2.0 * QC.transpose() * cn.D0;
    cn.constant = cn.D0.dot(Q * cn.D0);
  }
  return out;
}

namespace {

Eigen::VectorXd gather(const CondensedMpc& mpc, const CondensedNode& cn, const Eigen::VectorXd& u) {
  Eigen::VectorXd y(cn.E.rows());
  int at = 0;
  for (std::size_t k = 0; k < cn.domain.size(); ++k) {
    y.segment(at, cn.dims[k]) = u.segment(mpc.cmap.offset(cn.domain[k]), cn.dims[k]);
    at += cn.dims[k];
  }
  return y;
}

// Global index of every local coordinate of node p.
std::vector<int> global_index(const CondensedMpc& mpc, const CondensedNode& cn) {
  std::vector<int> idx;
  for (std::size_t k = 0; k < cn.domain.size(); ++k)
    for (int i = 0; i < cn.dims[k]; ++i) idx.push_back(mpc.cmap.offset(cn.domain[k]) + i);
  return idx;
}

}  // namespace

double CondensedMpc::objective(const Eigen::VectorXd& u) const {
  double acc = 0;
  for (const CondensedNode& cn : nodes) {
    const Eigen::VectorXd y = gather(*this, cn, u);
    acc += y.dot(cn.E * y) + cn.w.dot(y) + cn.constant;
  }
  return acc;
}

Eigen::SparseMatrix<double> CondensedMpc::hessian() const {
  std::vector<Eigen::Triplet<double>> trip;
  for (const CondensedNode& cn : nodes) {
    const std::vector<int> idx = global_index(*this, cn);
    for (std::size_t a = 0; a < idx.size(); ++a)
      for (std::size_t b = 0; b < idx.size(); ++b)
        trip.emplace_back(idx[a], idx[b], 2.0 * cn.E(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)));
  }
  Eigen::SparseMatrix<double> H(cmap.total_dim(), cmap.total_dim());
  H.setFromTriplets(trip.begin(), trip.end());
  return H;
}

Eigen::VectorXd CondensedMpc::linear_term() const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(cmap.total_dim());
  for (const CondensedNode& cn : nodes) {
    const std::vector<int> idx = global_index(*this, cn);
    for (std::size_t a = 0; a < idx.size(); ++a) g[idx[a]] += cn.w[static_cast<Eigen::Index>(a)];
  }
  return g;
}

Eigen::VectorXd CondensedMpc::gradient(const Eigen::VectorXd& u) const { return hessian() * u + linear_term(); }

ProblemSet make_mpc_problems(const CondensedMpc& mpc) {
  ProblemSet out;
  for (const CondensedNode& cn : mpc.nodes)
    out.push_back(std::make_shared<QuadraticLocalProblem>(cn.domain, cn.dims, cn.E, cn.w));
  return out;
}

Eigen::VectorXd solve_local_mpc(const CondensedMpc& mpc, int p, const Eigen::VectorXd& v,
                                const Eigen::VectorXd& weights) {
  const CondensedNode& cn = mpc.nodes.at(p);
  return QuadraticLocalProblem(cn.domain, cn.dims, cn.E, cn.w).solve(v, weights);
}

Eigen::VectorXd centralized_mpc_reference(const CondensedMpc& mpc) {
  const Eigen::SparseMatrix<double> H = mpc.hessian();
  const Eigen::VectorXd rhs = -mpc.linear_term();
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(H);
  if (ldlt.info() != Eigen::Success) throw SolverError("MPC reference: factorization failed");
  const Eigen::VectorXd D = ldlt.vectorD();
  if (D.size() > 0 && !(D.minCoeff() > 1e-14 * D.cwiseAbs().maxCoeff()))
    throw SolverError("MPC reference: Hessian is not positive definite",
                      D.minCoeff() / D.cwiseAbs().maxCoeff());
  Eigen::VectorXd u = ldlt.solve(rhs);
  const double scale = std::max(1.0, rhs.lpNorm<Eigen::Infinity>());
  double res = (rhs - H * u).lpNorm<Eigen::Infinity>();
  for (int pass = 0; pass < 3 && res > 1e-14 * scale; ++pass) {
    u += ldlt.solve(rhs - H * u);
    res = (rhs - H * u).lpNorm<Eigen::Infinity>();
  }
  if (!(res <= 1e-10 * scale)) throw SolverError("MPC reference: residual too large", res);
  return u;
}

// ---------------------------------------------------------------- serialization

std::string serialize(const MpcSystem& sys) {
  std::ostringstream out;
  out << "mpc " << sys.node_count() << ' ' << sys.horizon << ' ' << sys.seed << '\n';
  for (int p = 0; p < sys.node_count(); ++p) {
    const MpcNode& nd = sys.nodes[p];
    out << "node " << p << ' ' << nd.state_dim() << ' ' << nd.input_dim() << ' ' << nd.omega.size();
    for (int j : nd.omega) out << ' ' << j;
    out << "\nA " << p;
    write_matrix(out, nd.A);
    for (std::size_t k = 0; k < nd.omega.size(); ++k) {
      out << "\nB " << p << ' ' << nd.omega[k];
      write_matrix(out, nd.B[k]);
    }
    out << "\nQbar " << p;
    write_matrix(out, nd.Qbar);
    out << "\nQf " << p;
    write_matrix(out, nd.Qf);
    out << "\nRbar " << p;
    write_matrix(out, nd.Rbar);
    out << "\nx0 " << p;
    write_matrix(out, nd.x0);
    out << '\n';
  }
  return out.str();
}

MpcSystem parse_mpc_system(const std::string& text) {
  std::istringstream in(text);
  std::string tag;
  int P = 0;
  MpcSystem sys;
  if (!(in >> tag >> P >> sys.horizon >> sys.seed) || tag != "mpc" || P < 0)
    throw std::invalid_argument("mpc system: bad header");
  sys.nodes.resize(P);
  std::vector<int> n(P), m(P);
  // B blocks need m_j of later nodes: read all node lines first.
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) lines.push_back(line);
  for (const std::string& line : lines) {
    std::istringstream ls(line);
    int p = 0;
    std::size_t count = 0;
    if (!(ls >> tag) || tag != "node") continue;
    if (!(ls >> p) || p < 0 || p >= P) throw std::invalid_argument("mpc system: bad node id");
    if (!(ls >> n[p] >> m[p] >> count)) throw std::invalid_argument("mpc system: bad node line");
    sys.nodes[p].omega.resize(count);
    for (int& j : sys.nodes[p].omega)
      if (!(ls >> j)) throw std::invalid_argument("mpc system: short node line");
    require(n[p] > 0 && m[p] > 0, "dimensions must be positive");
  }
  for (const std::string& line : lines) {
    std::istringstream ls(line);
    int p = 0;
    if (!(ls >> tag) || tag == "node") continue;
    if (!(ls >> p) || p < 0 || p >= P) throw std::invalid_argument("mpc system: bad '" + tag + "' line");
    MpcNode& nd = sys.nodes[p];
    if (tag == "A") {
      nd.A = read_matrix(ls, n[p], n[p], "A");
    } else if (tag == "B") {
      int j = 0;
      if (!(ls >> j) || j < 0 || j >= P) throw std::invalid_argument("mpc system: bad B line");
      auto it = std::find(nd.omega.begin(), nd.omega.end(), j);
      require(it != nd.omega.end(), "B block outside Omega");
      nd.B.resize(nd.omega.size());
      nd.B[static_cast<std::size_t>(it - nd.omega.begin())] = read_matrix(ls, n[p], m[j], "B");
    } else if (tag == "Qbar") {
      nd.Qbar = read_matrix(ls, n[p], n[p], "Qbar");
    } else if (tag == "Qf") {
      nd.Qf = read_matrix(ls, n[p], n[p], "Qf");
    } else if (tag == "Rbar") {
      nd.Rbar = read_matrix(ls, m[p], m[p], "Rbar");
    } else if (tag == "x0") {
      nd.x0 = read_matrix(ls, n[p], 1, "x0").col(0);
    } else {
      throw std::invalid_argument("mpc system: unknown tag '" + tag + "'");
    }
  }
  sys.validate();
  return sys;
}

}  // namespace padmm
