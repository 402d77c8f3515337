#pragma once

#include <vector>

#include "tessera/base.hpp"

namespace tessera {

/// One difference constraint D_v - D_u >= min_gap with objective weight
/// `weight` on the slack (D_v - D_u - min_gap). equality pins the slack to 0.
struct DiffConstraint {
  int u = 0, v = 0;
  i64 min_gap = 0;
  i64 weight = 0;
  bool equality = false;
};

struct DifferenceLP {
  int n_vars = 0;
  std::vector<DiffConstraint> constraints;
};

struct LpResult {
  bool feasible = false;
  Vec d;             // integral optimum, per-component min normalized to 0
  i64 objective = 0; // sum weight * slack
  std::vector<int> violating_cycle;  // variable ids on an infeasible cycle
};

/// Exact integral optimum via min-cost-flow duality. Deterministic; after
/// solving, slack is pushed toward smaller D in variable order.
LpResult solve_difference_lp(const DifferenceLP& lp);

/// Pin reuse 0-1 program: C(i,j,k) with sum_j C(i,j,k)=1 for live i,
/// sum_i C(i,j,k)<=1, minimizing the number of distinct (i,j) connections.
struct ZeroOneProgram {
  int n_pins = 0;
  int n_ports = 0;
  std::vector<std::vector<int>> active;  // per dataflow: sorted live pins
};

struct IlpResult {
  bool feasible = false;
  i64 objective = 0;                      // distinct (pin, port) pairs used
  std::vector<std::vector<int>> port_of;  // [dataflow][pin] -> port or -1
};

/// Branch and bound with the combinatorial bound (distinct >= max_k |A(k)|).
/// Deterministic: first optimum in lexicographic (i,j,k) order wins.
IlpResult solve_01_ilp(const ZeroOneProgram& p);

}  // namespace tessera
