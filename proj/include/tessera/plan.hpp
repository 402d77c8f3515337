#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "tessera/arborescence.hpp"
#include "tessera/reuse.hpp"
#include "tessera/spec.hpp"

namespace tessera {

/// One physical FU-to-FU link in the fused design, with its per-dataflow
/// programming. Oriented src -> dst.
struct PlanEdge {
  std::string tensor;
  Vec src, dst;
  ReuseKind kind = ReuseKind::Direct;
  struct PerDf {
    bool active = false;
    i64 depth = 0;
    Vec delta_t;                  // zero for direct
    std::vector<Window> windows;  // open validity windows (empty = always)
  };
  std::vector<PerDf> per_df;
  i64 physical_depth = 0;  // max active depth over dataflows
};

/// Per-(tensor, dataflow) operand-stationary hold register/FIFO.
struct HoldInfo {
  bool present = false;
  i64 depth = 0;
  Vec delta_t;
  std::vector<Window> windows;
};

struct TensorPlan {
  std::string tensor;
  bool is_output = false;
  std::vector<PlanEdge> edges;
  std::vector<HoldInfo> hold;                  // per dataflow
  std::vector<std::vector<Vec>> roots_per_df;  // chain/commit roots
  /// FUs that touch memory, per dataflow (roots plus coverage promotions).
  std::map<Vec, std::set<int>> data_nodes;
};

struct InterconnectPlan {
  std::vector<TensorPlan> tensors;  // workload declaration order
  /// All enumerated solutions, [dataflow][tensor], for reports and tests.
  std::vector<std::vector<std::vector<ReuseSolution>>> solutions;
};

/// Inputs plan_chains needs from each dataflow for one tensor.
struct DfChainInput {
  Vec grid;  // the dataflow's own par_sizes
  Vec control;
  std::vector<ReuseSolution> direct;
  std::vector<ReuseSolution> delay;  // nonzero delta_s only
};

struct FusedChains {
  std::vector<PlanEdge> edges;                 // direct edges, activation filled
  std::vector<std::vector<Vec>> roots_per_df;  // BFS roots per dataflow
};

/// Fig. 5 heuristic: fuses direct interconnections across dataflows.
/// `longest_first` selects the alternative chain processing order.
FusedChains plan_chains(const std::string& tensor,
                        const std::vector<DfChainInput>& dfs, bool longest_first);

/// Adds per-dataflow delay interconnections between chain roots (inputs only)
/// and finalizes per-dataflow data nodes.
void attach_delay_edges(const FusedDesignSpec& spec, TensorPlan& plan,
                        const std::vector<std::vector<ReuseSolution>>& delay_by_df);

/// Full front-end plan for every tensor: solve, span, fuse, attach, and run
/// the coverage analysis that promotes under-served FUs to data nodes.
InterconnectPlan build_plan(const FusedDesignSpec& spec);

/// True when an FU coordinate lies inside a dataflow's own grid.
bool fu_in_grid(const Vec& s, const Vec& grid);

}  // namespace tessera
