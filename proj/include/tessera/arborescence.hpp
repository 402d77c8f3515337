#pragma once

#include <vector>

#include "tessera/base.hpp"
#include "tessera/reuse.hpp"

namespace tessera {

/// Generic directed edge for the arborescence solver. Nodes are 0..n-1.
struct ArborEdge {
  int src = 0, dst = 0;
  i64 cost = 0;
};

/// Minimum spanning arborescence over all n nodes with a virtual super-root:
/// every node may instead be a root at cost `root_penalty`. Tie-breaks follow
/// the input edge order (callers pass canonically sorted edges).
struct ArborResult {
  std::vector<int> parent_edge;  // per node: index into input edges, -1 = root
  std::vector<int> roots;        // ascending node ids
  i64 total_cost = 0;            // sum of chosen real-edge costs (no penalties)
};

ArborResult min_root_arborescence(int n_nodes, const std::vector<ArborEdge>& edges,
                                  i64 root_penalty);

/// The FU-grid instantiation used by the interconnect planner.
struct GridArborescence {
  struct Edge {
    Vec src, dst;
    int solution = 0;  // index into the candidate list
    i64 cost = 0;
  };
  std::vector<Edge> edges;
  std::vector<Vec> roots;  // FU coordinates, ascending
  i64 total_cost = 0;
};

/// Builds candidate edges for all in-grid FU pairs from the nonzero-delta_s
/// solutions and solves. For output tensors (reversed=true) the computation
/// runs on the edge-reversed graph so partial sums flow toward the roots.
GridArborescence min_arborescence(const Vec& grid,
                                  const std::vector<ReuseSolution>& candidates,
                                  bool reversed, i64 root_penalty);

/// Default penalty: sum of all instantiated candidate edge costs + 1.
i64 default_root_penalty(const Vec& grid, const std::vector<ReuseSolution>& candidates);

}  // namespace tessera
