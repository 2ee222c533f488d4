#pragma once

#include <span>
#include <vector>

#include "padmm/graph.hpp"

namespace padmm {

/// Tree in the network spanning a required node set. Unit edge costs, so
/// cost == edges.size().
struct SteinerTree {
  std::vector<int> nodes;   // ascending
  std::vector<Edge> edges;  // ascending

  /// Tree nodes that are not in `required` (ascending).
  std::vector<int> steiner_nodes(std::span<const int> required) const;
};

/// Metric-closure MST heuristic (approximation ratio 2).
///
///  1. BFS distances from every required node.
///  2. MST of the complete graph on the required nodes weighted by those
///     distances (Prim, ties broken by node id).
///  3. Each closure edge expanded to its BFS shortest path.
///  4. Spanning tree of the union of those paths (Kruskal, edges ascending).
///  5. Non-required leaves pruned until none remain.
///
/// Deterministic. Throws GraphError for empty or out-of-range required sets.
SteinerTree steiner_augment(const Network& net, std::span<const int> required);

/// Preprocessing for non-connected variables: every component whose induced
/// subgraph is disconnected gets a Steiner tree over its owners. Connected
/// components are left untouched (G_l' = G_l).
ComponentMap steiner_preprocess(const Network& net, const ComponentMap& cmap);

}  // namespace padmm
