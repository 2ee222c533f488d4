#include "padmm/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

#include "padmm/steiner.hpp"

namespace padmm {

// ---------------------------------------------------------------- QuadraticLocalProblem

QuadraticLocalProblem::QuadraticLocalProblem(std::vector<int> domain, std::vector<int> dims, Eigen::MatrixXd E,
                                             Eigen::VectorXd w)
    : domain_(std::move(domain)), dims_(std::move(dims)), E_(std::move(E)), w_(std::move(w)) {
  if (dims_.size() != domain_.size()) throw std::invalid_argument("QuadraticLocalProblem: dims/domain size mismatch");
  if (!std::is_sorted(domain_.begin(), domain_.end()))
    throw std::invalid_argument("QuadraticLocalProblem: domain must be ascending");
  int n = 0;
  for (int d : dims_) n += d;
  if (E_.rows() != n || E_.cols() != n || w_.size() != n)
    throw std::invalid_argument("QuadraticLocalProblem: E/w do not match the domain size");
}

Eigen::VectorXd QuadraticLocalProblem::solve(const Eigen::VectorXd& v, const Eigen::VectorXd& weights) const {
  const Eigen::Index n = w_.size();
  if (v.size() != n || weights.size() != static_cast<Eigen::Index>(dims_.size()))
    throw std::invalid_argument("QuadraticLocalProblem::solve: argument size mismatch");
  // Stationarity: (2E + diag(weights)) x = -(w + v).
  Eigen::MatrixXd H = 2.0 * E_;
  Eigen::Index at = 0;
  for (std::size_t i = 0; i < dims_.size(); ++i)
    for (int k = 0; k < dims_[i]; ++k, ++at) H(at, at) += weights[static_cast<Eigen::Index>(i)];
  const Eigen::VectorXd rhs = -(w_ + v);
  Eigen::LLT<Eigen::MatrixXd> llt(H);
  if (llt.info() != Eigen::Success) {
    throw SolverError("local quadratic subproblem is not positive definite");
  }
  Eigen::VectorXd x = llt.solve(rhs);
  const double residual = (H * x - rhs).lpNorm<Eigen::Infinity>();
  if (!std::isfinite(residual) || residual > 1e-8 * (1.0 + rhs.lpNorm<Eigen::Infinity>()))
    throw SolverError("local quadratic solve is ill-conditioned", residual);
  return x;
}

// ---------------------------------------------------------------- layout and state

ConsensusLayout::ConsensusLayout(const Network& net, const ComponentMap& cmap) : cmap_(cmap) {
  if (cmap.node_count() != net.node_count())
    throw GraphError("component map covers " + std::to_string(cmap.node_count()) + " nodes, network has " +
                     std::to_string(net.node_count()));
  const int P = net.node_count();
  node_slots_.assign(P, {});
  // slot_by_component[l] holds (node, slot) ascending by node.
  std::vector<std::vector<std::pair<int, int>>> slot_by_component(cmap.n_components());
  for (int p = 0; p < P; ++p) {
    for (int l : cmap.effective_domain(p)) {
      CopySlot s;
      s.node = p;
      s.component = l;
      s.dim = cmap.dim(l);
      s.offset = size_;
      s.steiner = cmap.is_steiner(p, l);
      size_ += s.dim;
      const int idx = static_cast<int>(slots_.size());
      node_slots_[p].push_back(idx);
      slot_by_component[l].emplace_back(p, idx);
      slots_.push_back(std::move(s));
    }
  }
  for (int l = 0; l < cmap.n_components(); ++l) {
    const auto& members = slot_by_component[l];
    auto slot_of = [&](int p) {
      auto it = std::lower_bound(members.begin(), members.end(), std::make_pair(p, -1));
      return it->second;
    };
    const InducedSubgraph sub = augmented_subgraph(net, cmap, l);
    for (const Edge& e : sub.edges) {
      const int su = slot_of(e.u);
      const int sv = slot_of(e.v);
      slots_[su].neighbors.push_back(sv);
      slots_[sv].neighbors.push_back(su);
    }
    for (const auto& [p, s] : members) {
      auto& nb = slots_[s].neighbors;
      std::sort(nb.begin(), nb.end(), [this](int a, int b) { return slots_[a].node < slots_[b].node; });
      slots_[s].degree = static_cast<int>(nb.size());
    }
  }
}

std::optional<int> ConsensusLayout::find(int p, int l) const {
  if (p < 0 || p >= node_count()) return std::nullopt;
  const auto& ns = node_slots_[p];
  auto it = std::lower_bound(ns.begin(), ns.end(), l, [this](int s, int comp) { return slots_[s].component < comp; });
  if (it == ns.end() || slots_[*it].component != l) return std::nullopt;
  return *it;
}

int ConsensusLayout::find_or_throw(int p, int l) const {
  auto s = find(p, l);
  if (!s) throw GraphError("component " + std::to_string(l) + " is not in S_p ∪ S_p' of node " + std::to_string(p));
  return *s;
}

CopyState::CopyState(std::shared_ptr<const ConsensusLayout> layout) : layout_(std::move(layout)) {
  x = Eigen::VectorXd::Zero(layout_->size());
  x_prev = x;
  gamma = x;
}

Eigen::VectorXd CopyState::copy(int p, int l) const {
  const CopySlot& s = layout_->slot(layout_->find_or_throw(p, l));
  return x.segment(s.offset, s.dim);
}

Eigen::VectorXd CopyState::dual(int p, int l) const {
  const CopySlot& s = layout_->slot(layout_->find_or_throw(p, l));
  return gamma.segment(s.offset, s.dim);
}

Eigen::VectorXd CopyState::previous_copy(int p, int l) const {
  const CopySlot& s = layout_->slot(layout_->find_or_throw(p, l));
  return x_prev.segment(s.offset, s.dim);
}

void EngineConfig::validate() const {
  if (!(rho > 0.0) || !std::isfinite(rho)) throw std::invalid_argument("rho must be positive");
  if (max_cs < 1) throw std::invalid_argument("max_cs must be at least 1");
  if (threads < 1) throw std::invalid_argument("threads must be at least 1");
}

const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::converged: return "converged";
    case RunStatus::max_steps: return "max_steps";
    case RunStatus::diverged: return "diverged";
  }
  return "unknown";
}

std::optional<int> RunTrace::cs_to_error(double threshold) const {
  for (const auto& r : records)
    if (r.relative_error <= threshold) return r.cs;
  return std::nullopt;
}

std::optional<std::int64_t> RunTrace::payload_to_error(double threshold) const {
  for (const auto& r : records)
    if (r.relative_error <= threshold) return r.payload_cumulative;
  return std::nullopt;
}

double relative_error(const CopyState& state, const Eigen::VectorXd& reference) {
  const ComponentMap& cmap = state.layout().components();
  if (reference.size() != cmap.total_dim())
    throw std::invalid_argument("reference has size " + std::to_string(reference.size()) + ", expected " +
                                std::to_string(cmap.total_dim()));
  const double scale = reference.lpNorm<Eigen::Infinity>();
  if (!(scale > 0.0)) throw std::invalid_argument("relative error needs a nonzero reference");
  double worst = 0.0;
  for (const CopySlot& s : state.layout().slots()) {
    if (s.steiner) continue;
    const double d = (state.x.segment(s.offset, s.dim) - reference.segment(cmap.offset(s.component), s.dim))
                         .lpNorm<Eigen::Infinity>();
    if (!(d <= worst)) worst = d;  // propagates NaN
  }
  return worst / scale;
}

// ---------------------------------------------------------------- single steps

namespace {

// Slot-indexed forms of the step formulas; `out` has the slot's dimension.
void v_alg1_into(const CopyState& state, const Coloring& coloring, int s, double rho, Eigen::Ref<Eigen::VectorXd> out) {
  const ConsensusLayout& layout = state.layout();
  const CopySlot& slot = layout.slot(s);
  const int c = coloring.color_of(slot.node);
  out = state.gamma.segment(slot.offset, slot.dim);
  for (int nb : slot.neighbors) {
    const CopySlot& t = layout.slot(nb);
    if (coloring.color_of(t.node) < c)
      out -= rho * state.x.segment(t.offset, t.dim);
    else
      out -= rho * state.x_prev.segment(t.offset, t.dim);
  }
}

void v_alg2_into(const CopyState& state, int s, double rho, Eigen::Ref<Eigen::VectorXd> out) {
  const ConsensusLayout& layout = state.layout();
  const CopySlot& slot = layout.slot(s);
  Eigen::VectorXd acc = static_cast<double>(slot.degree) * state.x_prev.segment(slot.offset, slot.dim);
  for (int nb : slot.neighbors) {
    const CopySlot& t = layout.slot(nb);
    acc += state.x_prev.segment(t.offset, t.dim);
  }
  out = state.gamma.segment(slot.offset, slot.dim) - 0.5 * rho * acc;
}

// gamma + scale * sum_j (x_p - x_j) on the newest copies.
void dual_into(const CopyState& state, int s, double scale, Eigen::Ref<Eigen::VectorXd> out) {
  const ConsensusLayout& layout = state.layout();
  const CopySlot& slot = layout.slot(s);
  const auto own = state.x.segment(slot.offset, slot.dim);
  out = state.gamma.segment(slot.offset, slot.dim);
  for (int nb : slot.neighbors) {
    const CopySlot& t = layout.slot(nb);
    out += scale * (own - state.x.segment(t.offset, t.dim));
  }
}

}  // namespace

Eigen::VectorXd compute_v_alg1(const CopyState& state, const Coloring& coloring, int p, int l, double rho) {
  const int s = state.layout().find_or_throw(p, l);
  Eigen::VectorXd out(state.layout().slot(s).dim);
  v_alg1_into(state, coloring, s, rho, out);
  return out;
}

Eigen::VectorXd compute_v_alg2(const CopyState& state, int p, int l, double rho) {
  const int s = state.layout().find_or_throw(p, l);
  Eigen::VectorXd out(state.layout().slot(s).dim);
  v_alg2_into(state, s, rho, out);
  return out;
}

Eigen::VectorXd dual_update_alg1(const CopyState& state, int p, int l, double rho) {
  const int s = state.layout().find_or_throw(p, l);
  Eigen::VectorXd out(state.layout().slot(s).dim);
  dual_into(state, s, rho, out);
  return out;
}

Eigen::VectorXd dual_update_alg2(const CopyState& state, int p, int l, double rho) {
  const int s = state.layout().find_or_throw(p, l);
  Eigen::VectorXd out(state.layout().slot(s).dim);
  dual_into(state, s, 0.5 * rho, out);
  return out;
}

Eigen::VectorXd local_solve(const ConsensusLayout& layout, int p, const LocalProblem* problem,
                            const Eigen::VectorXd& v, double rho) {
  const auto& slots = layout.node_slots(p);
  Eigen::VectorXd out(v.size());
  // Position of each slot inside the node-local vector.
  std::vector<int> local_offset(slots.size());
  int at = 0;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    local_offset[i] = at;
    at += layout.slot(slots[i]).dim;
  }
  if (at != v.size()) throw std::invalid_argument("local_solve: v does not match node layout");

  std::vector<char> handled(slots.size(), 0);
  if (problem != nullptr && !problem->domain().empty()) {
    const auto& dom = problem->domain();
    std::vector<std::size_t> picks;
    picks.reserve(dom.size());
    std::size_t i = 0;
    int size = 0;
    for (int l : dom) {
      while (i < slots.size() && layout.slot(slots[i]).component < l) ++i;
      if (i == slots.size() || layout.slot(slots[i]).component != l || layout.slot(slots[i]).steiner)
        throw GraphError("local problem of node " + std::to_string(p) + " depends on component " +
                         std::to_string(l) + " outside S_p");
      picks.push_back(i);
      size += layout.slot(slots[i]).dim;
    }
    Eigen::VectorXd vloc(size);
    Eigen::VectorXd weights(static_cast<Eigen::Index>(picks.size()));
    int pos = 0;
    for (std::size_t k = 0; k < picks.size(); ++k) {
      const CopySlot& s = layout.slot(slots[picks[k]]);
      vloc.segment(pos, s.dim) = v.segment(local_offset[picks[k]], s.dim);
      weights[static_cast<Eigen::Index>(k)] = rho * s.degree;
      pos += s.dim;
    }
    const Eigen::VectorXd xloc = problem->solve(vloc, weights);
    if (xloc.size() != size) throw SolverError("local solver returned a vector of the wrong size");
    pos = 0;
    for (std::size_t k = 0; k < picks.size(); ++k) {
      const CopySlot& s = layout.slot(slots[picks[k]]);
      out.segment(local_offset[picks[k]], s.dim) = xloc.segment(pos, s.dim);
      handled[picks[k]] = 1;
      pos += s.dim;
    }
  }
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (handled[i]) continue;
    const CopySlot& s = layout.slot(slots[i]);
    // f_p does not depend on this copy: minimizer of v'x + (rho D / 2)||x||^2.
    if (s.degree > 0)
      out.segment(local_offset[i], s.dim) = -v.segment(local_offset[i], s.dim) / (rho * s.degree);
    else
      out.segment(local_offset[i], s.dim).setZero();
  }
  return out;
}

// ---------------------------------------------------------------- engine

ConsensusEngine::ConsensusEngine(const Network& net, const ComponentMap& cmap, ProblemSet problems,
                                 EngineConfig config, Scheme scheme, std::optional<Coloring> coloring)
    : layout_(std::make_shared<const ConsensusLayout>(net, cmap)),
      problems_(std::move(problems)),
      config_(config),
      scheme_(scheme),
      coloring_(std::move(coloring)),
      state_(layout_) {
  config_.validate();
  if (static_cast<int>(problems_.size()) != net.node_count())
    throw std::invalid_argument("need one local problem per node");
  if (scheme_ == Scheme::color_sweep && !coloring_)
    throw std::invalid_argument("color sweep needs a coloring");
  if (coloring_ && static_cast<int>(coloring_->colors().size()) != net.node_count())
    throw std::invalid_argument("coloring does not match the network");
  for (int l = 0; l < cmap.n_components(); ++l) {
    if (cmap.augmented_owners(l).size() < 2) continue;
    if (!is_connected(augmented_subgraph(net, cmap, l)))
      throw GraphError("component " + std::to_string(l) +
                       " induces a disconnected subgraph; apply Steiner preprocessing (Algorithm 3)");
  }
  for (int p = 0; p < net.node_count(); ++p) {
    if (!problems_[p]) continue;
    for (int l : problems_[p]->domain())
      if (!cmap.owns(p, l))
        throw GraphError("local problem of node " + std::to_string(p) + " uses component " + std::to_string(l) +
                         " outside its domain");
  }
  all_nodes_.resize(net.node_count());
  for (int p = 0; p < net.node_count(); ++p) all_nodes_[p] = p;
}

void ConsensusEngine::update_node(int p) {
  const ConsensusLayout& layout = *layout_;
  const auto& slots = layout.node_slots(p);
  if (slots.empty()) return;
  int size = 0;
  for (int s : slots) size += layout.slot(s).dim;
  Eigen::VectorXd v(size);
  int at = 0;
  for (int s : slots) {
    const CopySlot& slot = layout.slot(s);
    if (scheme_ == Scheme::color_sweep)
      v_alg1_into(state_, *coloring_, s, config_.rho, v.segment(at, slot.dim));
    else
      v_alg2_into(state_, s, config_.rho, v.segment(at, slot.dim));
    at += slot.dim;
  }
  const Eigen::VectorXd xnew = local_solve(layout, p, problems_[p].get(), v, config_.rho);
  at = 0;
  for (int s : slots) {
    const CopySlot& slot = layout.slot(s);
    state_.x.segment(slot.offset, slot.dim) = xnew.segment(at, slot.dim);
    at += slot.dim;
  }
}

void ConsensusEngine::sweep(const std::vector<int>& nodes) {
  // Nodes in `nodes` never read each other's copies (same color, or Alg. 2
  // reading only x_prev), so any partition across threads gives the same bits.
  const int workers = std::min<int>(config_.threads, static_cast<int>(nodes.size()));
  if (workers <= 1) {
    for (int p : nodes) update_node(p);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < nodes.size(); i += workers) update_node(nodes[i]);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

void ConsensusEngine::iterate() {
  state_.x_prev = state_.x;
  if (scheme_ == Scheme::color_sweep) {
    for (int c = 0; c < coloring_->num_colors(); ++c) sweep(coloring_->color_class(c));
  } else {
    sweep(all_nodes_);
  }
  Eigen::VectorXd gamma_next = state_.gamma;
  const double scale = scheme_ == Scheme::color_sweep ? config_.rho : 0.5 * config_.rho;
  for (std::size_t s = 0; s < layout_->slots().size(); ++s) {
    const CopySlot& slot = layout_->slots()[s];
    dual_into(state_, static_cast<int>(s), scale, gamma_next.segment(slot.offset, slot.dim));
  }
  state_.gamma = std::move(gamma_next);
  last_change_ = state_.x.size() == 0 ? 0.0 : (state_.x - state_.x_prev).lpNorm<Eigen::Infinity>();
  ++state_.iteration;
}

RunResult drive(ConsensusEngine& engine, const std::optional<Eigen::VectorXd>& reference) {
  const EngineConfig& cfg = engine.config();
  RunTrace trace;
  const auto start = std::chrono::steady_clock::now();
  const std::int64_t payload = engine.layout().payload_per_cs();
  std::int64_t cumulative = 0;
  trace.status = RunStatus::max_steps;
  for (int cs = 1; cs <= cfg.max_cs; ++cs) {
    engine.iterate();
    cumulative += payload;
    TraceRecord rec;
    rec.cs = cs;
    rec.payload = payload;
    rec.payload_cumulative = cumulative;
    rec.relative_error = reference ? relative_error(engine.state(), *reference)
                                   : std::numeric_limits<double>::quiet_NaN();
    rec.wallclock = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    trace.records.push_back(rec);

    const bool finite = engine.state().x.allFinite();
    if (!finite || (reference && !(rec.relative_error <= cfg.divergence_threshold))) {
      trace.status = RunStatus::diverged;
      break;
    }
    if (reference && cfg.target_error > 0.0 && rec.relative_error <= cfg.target_error) {
      trace.status = RunStatus::converged;
      break;
    }
    if (engine.last_change() < cfg.tolerance) {
      trace.status = RunStatus::converged;
      break;
    }
  }
  return RunResult{std::move(trace), engine.state()};
}

RunResult run_algorithm1(const Network& net, const Coloring& coloring, const ComponentMap& cmap,
                         const ProblemSet& problems, const EngineConfig& config,
                         const std::optional<Eigen::VectorXd>& reference) {
  ConsensusEngine engine(net, cmap, problems, config, Scheme::color_sweep, coloring);
  return drive(engine, reference);
}

RunResult run_algorithm2(const Network& net, const ComponentMap& cmap, const ProblemSet& problems,
                         const EngineConfig& config, const std::optional<Eigen::VectorXd>& reference) {
  ConsensusEngine engine(net, cmap, problems, config, Scheme::parallel);
  return drive(engine, reference);
}

RunResult run_algorithm3(const Network& net, const Coloring& coloring, const ComponentMap& cmap,
                         const ProblemSet& problems, const EngineConfig& config,
                         const std::optional<Eigen::VectorXd>& reference) {
  const ComponentMap augmented = steiner_preprocess(net, cmap);
  ConsensusEngine engine(net, augmented, problems, config, Scheme::color_sweep, coloring);
  return drive(engine, reference);
}

}  // namespace padmm
