#pragma once

#include <map>
#include <string>
#include <vector>

#include "tessera/banking.hpp"
#include "tessera/dag.hpp"
#include "tessera/spec.hpp"

namespace tessera {

/// Dense integer tensors in logical (row-major) form plus the banked view
/// conversions used by the memory system.
struct MemoryImage {
  struct Tensor {
    Vec extents;
    std::vector<i64> flat;  // row-major
  };
  std::map<std::string, Tensor> tensors;

  static MemoryImage zeros(const FusedDesignSpec& spec);
  i64& at(const std::string& name, const Vec& idx);
  i64 at(const std::string& name, const Vec& idx) const;
};

/// Logical -> banked scatter under one dataflow's view. banks[b][addr].
std::vector<std::vector<i64>> scatter_banked(const MemoryImage::Tensor& t,
                                             const TensorBanking& tb, int dataflow);
/// Banked -> logical gather (inverse of scatter_banked).
void gather_banked(const std::vector<std::vector<i64>>& banks,
                   const TensorBanking& tb, int dataflow, MemoryImage::Tensor& t);

struct CostReport {
  i64 register_bits = 0;
  i64 fifo_bits = 0;
  i64 adder_count = 0;
  i64 mul_count = 0;
  i64 mux_count = 0;
  i64 reducer_ports = 0;
};

CostReport cost_report(const Dag& dag);

struct SimResult {
  MemoryImage outputs;                 // output tensors, gathered to logical
  i64 cycles_run = 0;
  i64 completion_cycle = -1;           // wall cycle of the last commit, -1 = none
  std::map<std::string, i64> toggles;  // per register-stage node
};

/// Two-phase cycle-accurate evaluation of one dataflow configuration.
/// cycles < 0 selects an automatic budget. want_trace enables toggle counts.
SimResult simulate(const Dag& dag, const FusedDesignSpec& spec,
                   const BankingPlan& banking, int dataflow,
                   const MemoryImage& inputs, i64 cycles, bool want_trace = false);

/// Direct loop-nest evaluation with exact integer arithmetic.
MemoryImage reference_execute(const FusedDesignSpec& spec, const MemoryImage& inputs);

/// Predicted cycles: prod(R_T) + the dataflow's fill/drain pipeline depth.
i64 estimate_performance(const Dag& dag, const FusedDesignSpec& spec, int dataflow);

}  // namespace tessera
