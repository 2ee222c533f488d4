#include "padmm/steiner.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <queue>
#include <string>

namespace padmm {

namespace {

struct BfsTree {
  std::vector<int> dist;
  std::vector<int> parent;
};

BfsTree bfs(const Network& net, int root) {
  const int n = net.node_count();
  BfsTree t{std::vector<int>(n, -1), std::vector<int>(n, -1)};
  std::queue<int> q;
  t.dist[root] = 0;
  q.push(root);
  while (!q.empty()) {
    const int p = q.front();
    q.pop();
    for (int nb : net.neighbors(p)) {
      if (t.dist[nb] < 0) {
        t.dist[nb] = t.dist[p] + 1;
        t.parent[nb] = p;
        q.push(nb);
      }
    }
  }
  return t;
}

struct DisjointSets {
  std::vector<int> parent;
  explicit DisjointSets(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[std::max(a, b)] = std::min(a, b);
    return true;
  }
};

}  // namespace

std::vector<int> SteinerTree::steiner_nodes(std::span<const int> required) const {
  std::vector<int> req(required.begin(), required.end());
  std::sort(req.begin(), req.end());
  std::vector<int> out;
  std::set_difference(nodes.begin(), nodes.end(), req.begin(), req.end(), std::back_inserter(out));
  return out;
}

SteinerTree steiner_augment(const Network& net, std::span<const int> required_in) {
  std::vector<int> required(required_in.begin(), required_in.end());
  std::sort(required.begin(), required.end());
  required.erase(std::unique(required.begin(), required.end()), required.end());
  if (required.empty()) throw GraphError("Steiner tree needs at least one required node");
  for (int r : required)
    if (r < 0 || r >= net.node_count())
      throw GraphError("required node " + std::to_string(r) + " is not in the network");

  const int k = static_cast<int>(required.size());
  if (k == 1) return SteinerTree{required, {}};

  std::vector<BfsTree> trees;
  trees.reserve(k);
  for (int r : required) trees.push_back(bfs(net, r));

  // Prim on the metric closure.
  constexpr int kInf = std::numeric_limits<int>::max();
  std::vector<char> in_tree(k, 0);
  std::vector<int> best(k, kInf), via(k, -1);
  best[0] = 0;
  std::vector<std::pair<int, int>> closure_edges;
  for (int step = 0; step < k; ++step) {
    int pick = -1;
    for (int i = 0; i < k; ++i)
      if (!in_tree[i] && (pick < 0 || best[i] < best[pick])) pick = i;
    in_tree[pick] = 1;
    if (via[pick] >= 0) closure_edges.emplace_back(via[pick], pick);
    for (int i = 0; i < k; ++i) {
      if (in_tree[i]) continue;
      const int d = trees[pick].dist[required[i]];
      if (d < best[i]) {
        best[i] = d;
        via[i] = pick;
      }
    }
  }

  // Expand closure edges into network paths.
  std::vector<Edge> union_edges;
  for (auto [a, b] : closure_edges) {
    const BfsTree& t = trees[a];
    int cur = required[b];
    while (cur != required[a]) {
      const int par = t.parent[cur];
      union_edges.push_back(make_edge(cur, par));
      cur = par;
    }
  }
  std::sort(union_edges.begin(), union_edges.end());
  union_edges.erase(std::unique(union_edges.begin(), union_edges.end()), union_edges.end());

  // Spanning tree of the union (all costs equal, so any spanning tree is an MST).
  DisjointSets sets(net.node_count());
  std::vector<Edge> tree_edges;
  for (const Edge& e : union_edges)
    if (sets.unite(e.u, e.v)) tree_edges.push_back(e);

  // Prune non-required leaves.
  std::vector<int> degree(net.node_count(), 0);
  for (const Edge& e : tree_edges) {
    ++degree[e.u];
    ++degree[e.v];
  }
  auto is_required = [&](int p) { return std::binary_search(required.begin(), required.end(), p); };
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<Edge> kept;
    kept.reserve(tree_edges.size());
    for (const Edge& e : tree_edges) {
      const bool leaf_u = degree[e.u] == 1 && !is_required(e.u);
      const bool leaf_v = degree[e.v] == 1 && !is_required(e.v);
      if (leaf_u || leaf_v) {
        --degree[e.u];
        --degree[e.v];
        changed = true;
      } else {
        kept.push_back(e);
      }
    }
    tree_edges = std::move(kept);
  }

  SteinerTree out;
  out.edges = std::move(tree_edges);
  out.nodes = required;
  for (const Edge& e : out.edges) {
    out.nodes.push_back(e.u);
    out.nodes.push_back(e.v);
  }
  std::sort(out.nodes.begin(), out.nodes.end());
  out.nodes.erase(std::unique(out.nodes.begin(), out.nodes.end()), out.nodes.end());
  return out;
}

ComponentMap steiner_preprocess(const Network& net, const ComponentMap& cmap) {
  ComponentMap out = cmap;
  for (int l = 0; l < cmap.n_components(); ++l) {
    if (cmap.owners(l).size() < 2 || cmap.is_augmented(l)) continue;
    if (is_connected(induced_subgraph(net, cmap, l))) continue;
    const SteinerTree tree = steiner_augment(net, cmap.owners(l));
    out.attach_steiner_tree(l, tree.nodes, tree.edges);
  }
  return out;
}

}  // namespace padmm
