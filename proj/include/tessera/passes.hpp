#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tessera/dag.hpp"
#include "tessera/spec.hpp"

namespace tessera {

struct LatencyTable {
  i64 mul = 1;
  i64 add = 0;
  i64 mux = 0;
  i64 addrgen = 1;
  i64 matmul = 1;
  i64 counter = 0;
  i64 memread = 1;
  i64 shift = 0;
  // Reducer: ceil(log2(arity)), computed per node
};

/// Per-dataflow static analysis: config-constant folding plus backward
/// liveness from the output tensor's MemWrite ports.
struct DfAnalysis {
  std::vector<std::optional<i64>> cval;  // per node: constant value, if any
  std::vector<char> live;                // per node: reaches a committed output
};
DfAnalysis analyze_dataflow(const Dag& dag, const std::string& output_tensor, int k);

/// Annotates structural latencies, solves the difference LP and inserts the
/// EL pipeline registers (removing any previous ones). Mandatory pass.
void delay_match(Dag& dag, const LatencyTable& lat = {});

/// Three-stage broadcast rewiring (group-objective LP, per-source MST
/// rewiring over spatially adjacent destinations, re-match). Reverts when
/// the rewired cost exceeds the original.
void rewire_broadcast(Dag& dag, const LatencyTable& lat = {});

/// Fuses directly connected adder chains/trees into Reducers.
void extract_reduction(Dag& dag);

/// Liveness-driven reducer pin remapping through the 0-1 program.
void reuse_pins(Dag& dag, const std::string& output_tensor);

/// Adds a ClockGate-driven enable to every register stage.
void power_gate(Dag& dag, const std::string& output_tensor);

/// Forward interval propagation; assigns ranges and widths everywhere.
void infer_bitwidth_inplace(Dag& dag, const FusedDesignSpec& spec);

struct PipelineStage {
  std::string pass;
  // cost snapshot fields (filled by the driver via cost_report)
};

/// Runs the configured pass list in the fixed pipeline order. `enabled`
/// lists optional pass names to run (delay_match and infer_bitwidth always
/// run). after_each is invoked with the pass name after every stage.
void run_pipeline(Dag& dag, const FusedDesignSpec& spec,
                  const std::vector<std::string>& enabled,
                  const std::function<void(const std::string&, Dag&)>& after_each);

extern const std::vector<std::string> kOptionalPasses;
extern const std::vector<std::string> kPipelineOrder;

}  // namespace tessera
