#include "padmm/reference_admm.hpp"

#include <string>

namespace padmm {

ExtendedAdmmReference::ExtendedAdmmReference(const Network& net, const Coloring& coloring, const ComponentMap& cmap,
                                             const ProblemSet& problems, double rho, int max_size)
    : layout_(std::make_shared<const ConsensusLayout>(net, cmap)), coloring_(coloring), rho_(rho) {
  if (!(rho > 0.0)) throw std::invalid_argument("rho must be positive");
  const int n = layout_->size();
  if (n > max_size)
    throw std::invalid_argument("reference ADMM limited to " + std::to_string(max_size) + " copy scalars, got " +
                                std::to_string(n));
  if (static_cast<int>(problems.size()) != net.node_count())
    throw std::invalid_argument("need one local problem per node");

  int m = 0;
  for (int l = 0; l < cmap.n_components(); ++l) {
    const InducedSubgraph sub = augmented_subgraph(net, cmap, l);
    if (!is_connected(sub)) throw GraphError("reference ADMM needs connected components");
    for (const Edge& e : sub.edges) {
      rows_.push_back({l, e.u, e.v, m});
      m += cmap.dim(l);
    }
  }
  A_ = Eigen::MatrixXd::Zero(m, n);
  lambda_ = Eigen::VectorXd::Zero(m);
  for (const Row& r : rows_) {
    const CopySlot& si = layout_->slot(layout_->find_or_throw(r.i, r.component));
    const CopySlot& sj = layout_->slot(layout_->find_or_throw(r.j, r.component));
    for (int k = 0; k < si.dim; ++k) {
      A_(r.row + k, si.offset + k) = 1.0;
      A_(r.row + k, sj.offset + k) = -1.0;
    }
    directed_[{r.component, r.i, r.j}] = Eigen::VectorXd::Zero(si.dim);
    directed_[{r.component, r.j, r.i}] = Eigen::VectorXd::Zero(si.dim);
  }

  Q_ = Eigen::MatrixXd::Zero(n, n);
  q_ = Eigen::VectorXd::Zero(n);
  for (int p = 0; p < net.node_count(); ++p) {
    if (!problems[p]) continue;
    const auto* quad = dynamic_cast<const QuadraticLocalProblem*>(problems[p].get());
    if (quad == nullptr) throw std::invalid_argument("reference ADMM supports quadratic local problems only");
    std::vector<int> index;
    for (int l : quad->domain()) {
      const CopySlot& s = layout_->slot(layout_->find_or_throw(p, l));
      for (int k = 0; k < s.dim; ++k) index.push_back(s.offset + k);
    }
    for (std::size_t a = 0; a < index.size(); ++a) {
      q_[index[a]] += quad->linear()[static_cast<Eigen::Index>(a)];
      for (std::size_t b = 0; b < index.size(); ++b)
        Q_(index[a], index[b]) += 2.0 * quad->quadratic()(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    }
  }

  color_columns_.assign(coloring.num_colors(), {});
  for (const CopySlot& s : layout_->slots())
    for (int k = 0; k < s.dim; ++k) color_columns_[coloring.color_of(s.node)].push_back(s.offset + k);
  z_ = Eigen::VectorXd::Zero(n);
}

void ExtendedAdmmReference::iterate() {
  for (const auto& cols : color_columns_) {
    if (cols.empty()) continue;
    const auto nc = static_cast<Eigen::Index>(cols.size());
    Eigen::MatrixXd Ac(A_.rows(), nc);
    Eigen::MatrixXd H(nc, nc);
    Eigen::VectorXd wc(nc);
    Eigen::VectorXd zc(nc);
    for (Eigen::Index a = 0; a < nc; ++a) {
      Ac.col(a) = A_.col(cols[a]);
      wc[a] = q_[cols[a]];
      zc[a] = z_[cols[a]];
      for (Eigen::Index b = 0; b < nc; ++b) H(a, b) = Q_(cols[a], cols[b]);
    }
    // r = A z restricted to the other blocks; Q z likewise for the gradient coupling.
    const Eigen::VectorXd r = A_ * z_ - Ac * zc;
    const Eigen::VectorXd Qz = Q_ * z_;
    Eigen::VectorXd coupling(nc);
    for (Eigen::Index a = 0; a < nc; ++a) coupling[a] = Qz[cols[a]];
    coupling -= H * zc;
    H += rho_ * Ac.transpose() * Ac;
    const Eigen::VectorXd rhs = -(wc + coupling + Ac.transpose() * lambda_ + rho_ * Ac.transpose() * r);
    const Eigen::VectorXd sol = H.ldlt().solve(rhs);
    for (Eigen::Index a = 0; a < nc; ++a) z_[cols[a]] = sol[a];
  }
  lambda_ += rho_ * (A_ * z_);
  for (auto& [key, val] : directed_) {
    const auto [l, i, j] = key;
    val += rho_ * (copy(i, l) - copy(j, l));
  }
  ++iteration_;
}

Eigen::VectorXd ExtendedAdmmReference::copy(int p, int l) const {
  const CopySlot& s = layout_->slot(layout_->find_or_throw(p, l));
  return z_.segment(s.offset, s.dim);
}

Eigen::VectorXd ExtendedAdmmReference::edge_dual(int l, int p, int j) const {
  const int a = std::min(p, j), b = std::max(p, j);
  for (const Row& r : rows_)
    if (r.component == l && r.i == a && r.j == b) return lambda_.segment(r.row, layout_->components().dim(l));
  throw GraphError("no edge {" + std::to_string(p) + "," + std::to_string(j) + "} in component " +
                   std::to_string(l));
}

Eigen::VectorXd ExtendedAdmmReference::directed_dual(int l, int i, int j) const {
  auto it = directed_.find({l, i, j});
  if (it == directed_.end())
    throw GraphError("no edge (" + std::to_string(i) + "," + std::to_string(j) + ") in component " +
                     std::to_string(l));
  return it->second;
}

Eigen::MatrixXd ExtendedAdmmReference::block_gram(int l, int c) const {
  std::vector<Eigen::Index> rows, cols;
  for (const Row& r : rows_)
    if (r.component == l)
      for (int k = 0; k < layout_->components().dim(l); ++k) rows.push_back(r.row + k);
  for (const CopySlot& s : layout_->slots())
    if (s.component == l && coloring_.color_of(s.node) == c)
      for (int k = 0; k < s.dim; ++k) cols.push_back(s.offset + k);
  Eigen::MatrixXd sub(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t a = 0; a < rows.size(); ++a)
    for (std::size_t b = 0; b < cols.size(); ++b) sub(a, b) = A_(rows[a], cols[b]);
  return sub.transpose() * sub;
}

}  // namespace padmm
