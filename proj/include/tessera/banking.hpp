#pragma once

#include <set>
#include <string>
#include <vector>

#include "tessera/plan.hpp"
#include "tessera/spec.hpp"

namespace tessera {

/// Per-dimension banking for one tensor under one dataflow.
struct BankDims {
  Vec B;     // bank counts from the Max/GCD+1 rule
  Vec g;     // per-dimension divisors
  Vec view;  // B padded so prod(view) == physical bank count
};

struct TensorBanking {
  std::string tensor;
  std::vector<BankDims> per_df;
  i64 physical_banks = 1;
  Vec extents;           // logical tensor extents over the fused domain
  i64 bank_capacity = 0; // words per bank, max over dataflow layouts
};

struct BankingPlan {
  std::vector<TensorBanking> tensors;  // workload declaration order
  const TensorBanking& of(const std::string& name) const;
};

/// Data-distribution switches: which banks each data-node FU must reach.
struct SwitchFabric {
  struct Port {
    std::string tensor;
    Vec fu;
    bool write = false;
    std::vector<std::set<i64>> banks_per_df;  // physical bank ids; empty set
                                              // when the node is inactive
  };
  std::vector<Port> ports;
};

/// Eq. 9 with the GCD refinement: per-dimension (B_i, g_i) from the
/// data-node index deltas at t=0.
BankDims bank_analysis(const FusedDesignSpec& spec, const DataflowSpec& df,
                       const std::string& tensor, const std::vector<Vec>& data_nodes);

/// Fuses per-dataflow analyses into one physical bank array with
/// per-dataflow views.
TensorBanking fuse_banking(const FusedDesignSpec& spec, const std::string& tensor,
                           std::vector<BankDims> per_df);

BankingPlan build_banking(const FusedDesignSpec& spec, const InterconnectPlan& plan);

/// Builds the bipartite node<->bank reachability (over all t, per dataflow).
/// fan_in_limit 0 means unlimited; exceeding it raises a diagnostic string
/// in *diagnostics but still returns the fabric.
SwitchFabric build_switches(const FusedDesignSpec& spec, const InterconnectPlan& plan,
                            const BankingPlan& banking,
                            std::vector<std::string>* diagnostics,
                            i64 fan_in_limit = 0);

// ---- layout -----------------------------------------------------------------

/// Physical bank id of index d under a dataflow view.
i64 bank_of(const Vec& d, const BankDims& dims);
/// Within-bank word address of index d (row-major locals, intra-group
/// offsets appended as the fastest dimension).
i64 bank_addr(const Vec& d, const BankDims& dims, const Vec& extents);

/// Exhaustive conflict check over the full t domain of every dataflow:
/// returns descriptions of any same-cycle same-bank accesses to distinct
/// indexes (empty = conflict-free).
std::vector<std::string> check_bank_conflicts(const FusedDesignSpec& spec,
                                              const InterconnectPlan& plan,
                                              const BankingPlan& banking);

}  // namespace tessera
