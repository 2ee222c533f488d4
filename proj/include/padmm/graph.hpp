#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace padmm {

/// Thrown for malformed graphs, component maps and graph files.
class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Undirected edge stored with u < v.
struct Edge {
  int u = 0;
  int v = 0;
  auto operator<=>(const Edge&) const = default;
};

inline Edge make_edge(int a, int b) { return a < b ? Edge{a, b} : Edge{b, a}; }

/// Connected undirected communication graph. Node ids are 0-based.
///
/// Immutable after construction: edges are normalized to (min, max), sorted
/// and deduplicated, adjacency lists are sorted ascending.
class Network {
 public:
  /// Throws GraphError on out-of-range ids, self-loops or a disconnected graph.
  static Network from_edges(int node_count, std::vector<std::pair<int, int>> edges);

  int node_count() const { return static_cast<int>(adjacency_.size()); }
  const std::vector<Edge>& edges() const { return edges_; }
  std::span<const int> neighbors(int p) const { return adjacency_.at(p); }
  int degree(int p) const { return static_cast<int>(adjacency_.at(p).size()); }
  int max_degree() const;
  bool has_edge(int a, int b) const;

 private:
  Network() = default;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> adjacency_;
};

/// Proper node coloring; colors are 0..C-1 and every class is nonempty.
class Coloring {
 public:
  /// Validates properness and that colors 0..C-1 are all used.
  static Coloring from_assignment(const Network& net, std::vector<int> color_of);

  int num_colors() const { return static_cast<int>(classes_.size()); }
  int color_of(int p) const { return color_of_.at(p); }
  const std::vector<int>& color_class(int c) const { return classes_.at(c); }
  const std::vector<int>& colors() const { return color_of_; }

 private:
  Coloring() = default;
  std::vector<int> color_of_;
  std::vector<std::vector<int>> classes_;
};

/// Greedy coloring in ascending node order, smallest feasible color.
Coloring greedy_color(const Network& net);

/// Which nodes depend on which components of the global variable.
///
/// Component l has dimension dim(l) (scalars are 1) and occupies
/// [offset(l), offset(l) + dim(l)) in the concatenated global vector.
/// owners(l) is V_l, node_domain(p) is S_p. After Steiner augmentation,
/// steiner_domain(p) is S_p', augmented_owners(l) is V_l' and
/// steiner_edges(l) is the tree edge set F_l.
class ComponentMap {
 public:
  /// Builds V_l from S_p. Empty dims means every component is scalar.
  /// Throws GraphError for component ids out of range or duplicate entries.
  static ComponentMap from_node_domains(int n_components, std::vector<std::vector<int>> node_domains,
                                        std::vector<int> dims = {});

  /// Every node owns every component (global-variable mode).
  static ComponentMap global(int node_count, int n_components, std::vector<int> dims = {});

  int n_components() const { return static_cast<int>(owners_.size()); }
  int node_count() const { return static_cast<int>(domains_.size()); }
  int dim(int l) const { return dims_.at(l); }
  int offset(int l) const { return offsets_.at(l); }
  int total_dim() const { return offsets_.empty() ? 0 : offsets_.back() + dims_.back(); }

  const std::vector<int>& owners(int l) const { return owners_.at(l); }
  const std::vector<int>& node_domain(int p) const { return domains_.at(p); }
  const std::vector<int>& steiner_domain(int p) const { return steiner_domains_.at(p); }
  const std::vector<int>& augmented_owners(int l) const { return augmented_owners_.at(l); }
  const std::vector<Edge>& steiner_edges(int l) const { return steiner_edges_.at(l); }

  bool owns(int p, int l) const;
  bool is_steiner(int p, int l) const;
  /// True when component l was augmented with a Steiner tree.
  bool is_augmented(int l) const { return augmented_.at(l); }
  bool any_augmented() const;

  /// S_p ∪ S_p', ascending.
  std::vector<int> effective_domain(int p) const;

  /// True when some component is owned by every node (∩_p S_p ≠ ∅).
  bool has_global_component() const;

  /// Replaces V_l' by tree_nodes and records F_l; the non-owners in
  /// tree_nodes become Steiner nodes for l.
  void attach_steiner_tree(int l, const std::vector<int>& tree_nodes, const std::vector<Edge>& tree_edges);

 private:
  ComponentMap() = default;
  std::vector<int> dims_;
  std::vector<int> offsets_;
  std::vector<std::vector<int>> owners_;
  std::vector<std::vector<int>> domains_;
  std::vector<std::vector<int>> steiner_domains_;
  std::vector<std::vector<int>> augmented_owners_;
  std::vector<std::vector<Edge>> steiner_edges_;
  std::vector<bool> augmented_;
};

/// Subgraph of the network spanned by a node set (plus optional extra edges).
struct InducedSubgraph {
  int component = -1;
  std::vector<int> nodes;     // ascending
  std::vector<Edge> edges;    // ascending
  std::vector<int> degrees;   // aligned with nodes

  /// Degree of p inside the subgraph; throws if p is not a member.
  int degree_of(int p) const;
  bool contains(int p) const;
};

/// Restriction of net to `nodes`, with `extra_edges` merged in.
InducedSubgraph restrict_to(const Network& net, std::vector<int> nodes, const std::vector<Edge>& extra_edges = {});

/// G_l = (V_l, E_l). Throws GraphError for an unknown component.
InducedSubgraph induced_subgraph(const Network& net, const ComponentMap& cmap, int l);

/// G_l' = (V_l', E_l ∪ F_l); equals G_l when l was not augmented.
InducedSubgraph augmented_subgraph(const Network& net, const ComponentMap& cmap, int l);

/// A subgraph with zero or one node counts as connected.
bool is_connected(const InducedSubgraph& sub);

/// Barabasi-Albert preferential attachment.
///
/// Variant: nodes 0..m-1 start isolated; node m links to all of them; each
/// later node draws m distinct targets uniformly from the list of edge
/// endpoints seen so far (so degree-proportional). Edge count is (P-m)*m.
/// Uses padmm::Rng, so the graph is reproducible across builds.
Network generate_barabasi_albert(int node_count, int m, std::uint64_t seed);

/// Whitespace-separated 0-based id pairs, one edge per line. Blank lines and
/// lines starting with '#' are ignored. Node count is max id + 1.
Network load_edge_list(const std::string& path);
Network parse_edge_list(const std::string& text);

void write_edge_list(const Network& net, const std::string& path);

}  // namespace padmm
