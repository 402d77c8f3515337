#pragma once

#include <string>
#include <vector>

#include "tessera/spec.hpp"

namespace tessera {

enum class ReuseKind { Direct, Delay };

/// One admissible data-sharing relation for a tensor under a dataflow:
/// FU s at local time t and FU s+delta_s at local time t+delta_t access the
/// same element. fifo_depth is the physical (wall-clock) register count.
struct ReuseSolution {
  std::string tensor;
  ReuseKind kind = ReuseKind::Direct;
  Vec delta_s;
  Vec delta_t;      // all-zero for direct
  i64 fifo_depth = 0;
  /// Alternate delta_t values with the same physical depth (window unions).
  std::vector<Vec> same_depth_alts;
};

/// Eq. 6 solutions: nonzero delta_s in the d_S box with
/// M_{I->D} M_{S->I} delta_s = 0 and delta_t_bias >= 0. Depth = delta_t_bias.
std::vector<ReuseSolution> solve_direct(const FusedDesignSpec& spec,
                                        const DataflowSpec& df,
                                        const std::string& tensor);

/// Eq. 7 solutions: for each delta_s in the box (including 0), the minimal
/// physical-depth delta_t (|dt_j| < R_T_j, depth >= 0, dt != 0). Returns at
/// most one solution per delta_s; same-depth alternates are attached.
std::vector<ReuseSolution> solve_delay(const FusedDesignSpec& spec,
                                       const DataflowSpec& df,
                                       const std::string& tensor);

/// Component-wise validity window of a delay relation at the consumer:
/// data is valid at local t iff t - delta_t lies inside [0, R_T).
/// Encoded as per-dim bounds on t: lo_j <= t_j <= hi_j.
struct Window {
  Vec lo, hi;
  bool contains(const Vec& t) const {
    for (size_t i = 0; i < lo.size(); ++i)
      if (t[i] < lo[i] || t[i] > hi[i]) return false;
    return true;
  }
};

Window window_of(const Vec& delta_t, const Vec& for_sizes);

/// Re-check a solution against its defining equation. Used by tests and
/// the plan builder as a guard.
bool reuse_equation_holds(const FusedDesignSpec& spec, const DataflowSpec& df,
                          const ReuseSolution& sol);

}  // namespace tessera
