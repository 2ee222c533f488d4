#include "padmm/graph.hpp"

#include <algorithm>
#include <fstream>
#include <queue>
#include <sstream>

#include "padmm/rng.hpp"

namespace padmm {

namespace {

bool connected_over(int n, const std::vector<std::vector<int>>& adjacency) {
  if (n <= 1) return true;
  std::vector<char> seen(n, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int count = 1;
  while (!stack.empty()) {
    const int p = stack.back();
    stack.pop_back();
    for (int q : adjacency[p]) {
      if (!seen[q]) {
        seen[q] = 1;
        ++count;
        stack.push_back(q);
      }
    }
  }
  return count == n;
}

void sort_unique(std::vector<int>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

}  // namespace

// ---------------------------------------------------------------- Network

Network Network::from_edges(int node_count, std::vector<std::pair<int, int>> edges) {
  if (node_count <= 0) throw GraphError("network needs at least one node");
  Network net;
  net.edges_.reserve(edges.size());
  for (auto [a, b] : edges) {
    if (a < 0 || b < 0 || a >= node_count || b >= node_count)
      throw GraphError("edge (" + std::to_string(a) + "," + std::to_string(b) + ") references a node outside 0.." +
                       std::to_string(node_count - 1));
    if (a == b) throw GraphError("self-loop at node " + std::to_string(a));
    net.edges_.push_back(make_edge(a, b));
  }
  std::sort(net.edges_.begin(), net.edges_.end());
  net.edges_.erase(std::unique(net.edges_.begin(), net.edges_.end()), net.edges_.end());

  net.adjacency_.assign(node_count, {});
  for (const Edge& e : net.edges_) {
    net.adjacency_[e.u].push_back(e.v);
    net.adjacency_[e.v].push_back(e.u);
  }
  for (auto& nbrs : net.adjacency_) std::sort(nbrs.begin(), nbrs.end());

  if (!connected_over(node_count, net.adjacency_)) throw GraphError("network is not connected");
  return net;
}

int Network::max_degree() const {
  int best = 0;
  for (const auto& nbrs : adjacency_) best = std::max(best, static_cast<int>(nbrs.size()));
  return best;
}

bool Network::has_edge(int a, int b) const {
  const auto& nbrs = adjacency_.at(a);
  return std::binary_search(nbrs.begin(), nbrs.end(), b);
}

// ---------------------------------------------------------------- Coloring

Coloring Coloring::from_assignment(const Network& net, std::vector<int> color_of) {
  if (static_cast<int>(color_of.size()) != net.node_count())
    throw GraphError("coloring size does not match node count");
  int num_colors = 0;
  for (int c : color_of) {
    if (c < 0) throw GraphError("negative color");
    num_colors = std::max(num_colors, c + 1);
  }
  for (const Edge& e : net.edges())
    if (color_of[e.u] == color_of[e.v])
      throw GraphError("improper coloring: edge (" + std::to_string(e.u) + "," + std::to_string(e.v) +
                       ") joins two nodes of color " + std::to_string(color_of[e.u]));
  Coloring col;
  col.classes_.assign(num_colors, {});
  for (int p = 0; p < net.node_count(); ++p) col.classes_[color_of[p]].push_back(p);
  for (int c = 0; c < num_colors; ++c)
    if (col.classes_[c].empty()) throw GraphError("color " + std::to_string(c) + " is unused");
  col.color_of_ = std::move(color_of);
  return col;
}

Coloring greedy_color(const Network& net) {
  const int n = net.node_count();
  std::vector<int> color(n, -1);
  std::vector<int> taken(net.max_degree() + 2, -1);
  for (int p = 0; p < n; ++p) {
    for (int q : net.neighbors(p))
      if (color[q] >= 0) taken[color[q]] = p;
    int c = 0;
    while (taken[c] == p) ++c;
    color[p] = c;
  }
  return Coloring::from_assignment(net, std::move(color));
}

// ---------------------------------------------------------------- ComponentMap

ComponentMap ComponentMap::from_node_domains(int n_components, std::vector<std::vector<int>> node_domains,
                                             std::vector<int> dims) {
  if (n_components < 0) throw GraphError("negative component count");
  if (dims.empty()) dims.assign(n_components, 1);
  if (static_cast<int>(dims.size()) != n_components) throw GraphError("dims size does not match component count");
  ComponentMap map;
  map.dims_ = std::move(dims);
  map.offsets_.resize(n_components);
  int acc = 0;
  for (int l = 0; l < n_components; ++l) {
    if (map.dims_[l] <= 0) throw GraphError("component " + std::to_string(l) + " has non-positive dimension");
    map.offsets_[l] = acc;
    acc += map.dims_[l];
  }
  map.owners_.assign(n_components, {});
  const int P = static_cast<int>(node_domains.size());
  for (int p = 0; p < P; ++p) {
    auto& dom = node_domains[p];
    std::sort(dom.begin(), dom.end());
    if (std::adjacent_find(dom.begin(), dom.end()) != dom.end())
      throw GraphError("duplicate component in domain of node " + std::to_string(p));
    for (int l : dom) {
      if (l < 0 || l >= n_components)
        throw GraphError("node " + std::to_string(p) + " references unknown component " + std::to_string(l));
      map.owners_[l].push_back(p);
    }
  }
  map.domains_ = std::move(node_domains);
  map.steiner_domains_.assign(P, {});
  map.augmented_owners_ = map.owners_;
  map.steiner_edges_.assign(n_components, {});
  map.augmented_.assign(n_components, false);
  return map;
}

ComponentMap ComponentMap::global(int node_count, int n_components, std::vector<int> dims) {
  std::vector<int> all(n_components);
  for (int l = 0; l < n_components; ++l) all[l] = l;
  return from_node_domains(n_components, std::vector<std::vector<int>>(node_count, all), std::move(dims));
}

bool ComponentMap::owns(int p, int l) const {
  const auto& dom = domains_.at(p);
  return std::binary_search(dom.begin(), dom.end(), l);
}

bool ComponentMap::is_steiner(int p, int l) const {
  const auto& dom = steiner_domains_.at(p);
  return std::binary_search(dom.begin(), dom.end(), l);
}

bool ComponentMap::any_augmented() const {
  return std::any_of(augmented_.begin(), augmented_.end(), [](bool b) { return b; });
}

std::vector<int> ComponentMap::effective_domain(int p) const {
  std::vector<int> out;
  const auto& a = domains_.at(p);
  const auto& b = steiner_domains_.at(p);
  out.reserve(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

bool ComponentMap::has_global_component() const {
  const int P = node_count();
  return std::any_of(owners_.begin(), owners_.end(),
                     [P](const std::vector<int>& v) { return static_cast<int>(v.size()) == P && P > 0; });
}

void ComponentMap::attach_steiner_tree(int l, const std::vector<int>& tree_nodes, const std::vector<Edge>& tree_edges) {
  if (l < 0 || l >= n_components()) throw GraphError("unknown component " + std::to_string(l));
  if (augmented_[l]) throw GraphError("component " + std::to_string(l) + " already augmented");
  std::vector<int> nodes = tree_nodes;
  sort_unique(nodes);
  for (int p : owners_[l])
    if (!std::binary_search(nodes.begin(), nodes.end(), p))
      throw GraphError("Steiner tree for component " + std::to_string(l) + " misses required node " +
                       std::to_string(p));
  for (int p : nodes) {
    if (p < 0 || p >= node_count()) throw GraphError("Steiner tree node out of range");
    if (!owns(p, l)) {
      auto& sd = steiner_domains_[p];
      sd.insert(std::upper_bound(sd.begin(), sd.end(), l), l);
    }
  }
  augmented_owners_[l] = std::move(nodes);
  steiner_edges_[l] = tree_edges;
  std::sort(steiner_edges_[l].begin(), steiner_edges_[l].end());
  augmented_[l] = true;
}

// ---------------------------------------------------------------- subgraphs

int InducedSubgraph::degree_of(int p) const {
  auto it = std::lower_bound(nodes.begin(), nodes.end(), p);
  if (it == nodes.end() || *it != p) throw GraphError("node " + std::to_string(p) + " is not in the subgraph");
  return degrees[it - nodes.begin()];
}

bool InducedSubgraph::contains(int p) const { return std::binary_search(nodes.begin(), nodes.end(), p); }

InducedSubgraph restrict_to(const Network& net, std::vector<int> nodes, const std::vector<Edge>& extra_edges) {
  InducedSubgraph sub;
  sort_unique(nodes);
  sub.nodes = std::move(nodes);
  for (int p : sub.nodes) {
    if (p < 0 || p >= net.node_count()) throw GraphError("subgraph node out of range");
    for (int q : net.neighbors(p))
      if (p < q && std::binary_search(sub.nodes.begin(), sub.nodes.end(), q)) sub.edges.push_back({p, q});
  }
  for (const Edge& e : extra_edges) {
    if (!sub.contains(e.u) || !sub.contains(e.v)) throw GraphError("extra edge endpoint outside subgraph");
    if (!net.has_edge(e.u, e.v)) throw GraphError("extra edge is not a network edge");
    sub.edges.push_back(make_edge(e.u, e.v));
  }
  std::sort(sub.edges.begin(), sub.edges.end());
  sub.edges.erase(std::unique(sub.edges.begin(), sub.edges.end()), sub.edges.end());
  sub.degrees.assign(sub.nodes.size(), 0);
  for (const Edge& e : sub.edges) {
    ++sub.degrees[std::lower_bound(sub.nodes.begin(), sub.nodes.end(), e.u) - sub.nodes.begin()];
    ++sub.degrees[std::lower_bound(sub.nodes.begin(), sub.nodes.end(), e.v) - sub.nodes.begin()];
  }
  return sub;
}

InducedSubgraph induced_subgraph(const Network& net, const ComponentMap& cmap, int l) {
  if (l < 0 || l >= cmap.n_components()) throw GraphError("unknown component " + std::to_string(l));
  InducedSubgraph sub = restrict_to(net, cmap.owners(l));
  sub.component = l;
  return sub;
}

InducedSubgraph augmented_subgraph(const Network& net, const ComponentMap& cmap, int l) {
  if (l < 0 || l >= cmap.n_components()) throw GraphError("unknown component " + std::to_string(l));
  // E_l' = E_l ∪ F_l: edges among the original owners plus the tree edges.
  InducedSubgraph base = restrict_to(net, cmap.owners(l));
  std::vector<Edge> edges = base.edges;
  edges.insert(edges.end(), cmap.steiner_edges(l).begin(), cmap.steiner_edges(l).end());
  InducedSubgraph sub;
  sub.component = l;
  sub.nodes = cmap.augmented_owners(l);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  sub.edges = std::move(edges);
  sub.degrees.assign(sub.nodes.size(), 0);
  for (const Edge& e : sub.edges) {
    ++sub.degrees[std::lower_bound(sub.nodes.begin(), sub.nodes.end(), e.u) - sub.nodes.begin()];
    ++sub.degrees[std::lower_bound(sub.nodes.begin(), sub.nodes.end(), e.v) - sub.nodes.begin()];
  }
  return sub;
}

bool is_connected(const InducedSubgraph& sub) {
  const int n = static_cast<int>(sub.nodes.size());
  std::vector<std::vector<int>> adj(n);
  auto index = [&](int p) { return static_cast<int>(std::lower_bound(sub.nodes.begin(), sub.nodes.end(), p) - sub.nodes.begin()); };
  for (const Edge& e : sub.edges) {
    adj[index(e.u)].push_back(index(e.v));
    adj[index(e.v)].push_back(index(e.u));
  }
  return connected_over(n, adj);
}

// ---------------------------------------------------------------- generation and IO

Network generate_barabasi_albert(int node_count, int m, std::uint64_t seed) {
  if (m < 1 || node_count <= m)
    throw GraphError("Barabasi-Albert needs P > m >= 1 (got P=" + std::to_string(node_count) +
                     ", m=" + std::to_string(m) + ")");
  Rng rng(seed);
  std::vector<std::pair<int, int>> edges;
  edges.reserve(static_cast<std::size_t>(node_count - m) * m);
  std::vector<int> endpoints;  // each node repeated once per incident edge
  std::vector<int> targets(m);
  for (int i = 0; i < m; ++i) targets[i] = i;
  for (int source = m; source < node_count; ++source) {
    for (int t : targets) {
      edges.emplace_back(source, t);
      endpoints.push_back(t);
      endpoints.push_back(source);
    }
    // Next targets: m distinct nodes, degree-proportional.
    std::vector<int> chosen;
    while (static_cast<int>(chosen.size()) < m) {
      const int cand = endpoints[rng.uniform_index(endpoints.size())];
      if (std::find(chosen.begin(), chosen.end(), cand) == chosen.end()) chosen.push_back(cand);
    }
    std::sort(chosen.begin(), chosen.end());
    targets = std::move(chosen);
  }
  return Network::from_edges(node_count, std::move(edges));
}

Network parse_edge_list(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::pair<int, int>> edges;
  int max_id = -1;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    long long a = 0, b = 0;
    std::string rest;
    if (!(ls >> a >> b) || (ls >> rest))
      throw GraphError("edge list line " + std::to_string(lineno) + ": expected two integers");
    if (a < 0 || b < 0 || a > 100'000'000 || b > 100'000'000)
      throw GraphError("edge list line " + std::to_string(lineno) + ": node id out of range");
    if (a == b) throw GraphError("edge list line " + std::to_string(lineno) + ": self-loop");
    edges.emplace_back(static_cast<int>(a), static_cast<int>(b));
    max_id = std::max<int>(max_id, static_cast<int>(std::max(a, b)));
  }
  if (max_id < 0) throw GraphError("edge list is empty");
  return Network::from_edges(max_id + 1, std::move(edges));
}

Network load_edge_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw GraphError("cannot open edge list " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_edge_list(buf.str());
}

void write_edge_list(const Network& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw GraphError("cannot write edge list " + path);
  for (const Edge& e : net.edges()) out << e.u << ' ' << e.v << '\n';
}

}  // namespace padmm
