#pragma once

#include <string>
#include <vector>

#include "tessera/affine.hpp"

namespace tessera {

enum class Prim {
  Counter,
  AddressGen,
  ConstMatMul,
  Add,
  Mul,
  ShiftLeft,
  Mux,
  Reducer,
  Delay,
  Fifo,
  MemRead,
  MemWrite,
  ClockGate,
  CompareGE,
  ConfigReg,
  InPort,
  OutPort,
};

const char* prim_name(Prim p);

struct Interval {
  i64 lo = 0, hi = 0;
};

struct PinRef {
  int node = -1;
  int pin = 0;
};

/// Delay provenance: reuse/hold/control depths are semantic (part of the
/// ideal model); Matching delays are the EL registers inserted by the LP.
enum class DelayTag { Semantic = 0, Control = 1, Matching = 2 };

struct DagNode {
  int id = -1;
  Prim kind = Prim::Add;
  std::string name;
  bool dead = false;
  std::vector<PinRef> inputs;

  // static attributes (meaning depends on kind)
  i64 depth = 0;              // Delay: stages; Fifo: physical depth
  DelayTag tag = DelayTag::Semantic;
  bool invert = false;        // CompareGE: output = !(x >= threshold)
  bool gated = false;         // Delay/Fifo: last input pin is a clock enable
  i64 latency = 0;            // structural L_v (annotated by delay_match)
  int counter_dims = 0;       // Counter: number of t outputs

  // per-dataflow scalar config: ConfigReg value, CompareGE threshold,
  // Fifo active tap, ClockGate activation mask
  std::vector<i64> df_value;
  std::vector<Vec> df_radix;  // Counter radices per dataflow

  struct AddrCfg {
    bool active = false;
    AffineMap map;  // composed access over local t (FU folded into bias)
    Vec g, view, extents;
    bool bank_out = false;  // true: bank index output; false: word address
  };
  std::vector<AddrCfg> addr;  // AddressGen/ConstMatMul per dataflow

  std::string tensor;  // provenance: Mem*, AddressGen, hold Fifos
  int bank = -1;       // Mem*
  Vec fu;              // provenance FU coordinate (empty = control/memory)
  i64 accum_bound = 0; // hold Fifo: max accesses of one element (range bound)

  // inference results (single output; Counter uses the pin vectors)
  Interval range;
  int width = 0;
  std::vector<Interval> pin_ranges;
  std::vector<int> pin_widths;
  int d_level = 0;  // structural depth D_v after matching

  int out_pins() const { return kind == Prim::Counter ? counter_dims + 2 : 1; }
};

struct Dag {
  std::vector<DagNode> nodes;  // id == index; dead nodes remain as husks
  int n_dataflows = 1;
  bool matched = false;  // delay matching ran: simulation models latency

  DagNode& node(int id) { return nodes[size_t(id)]; }
  const DagNode& node(int id) const { return nodes[size_t(id)]; }

  int add(DagNode n) {
    n.id = int(nodes.size());
    nodes.push_back(std::move(n));
    return nodes.back().id;
  }

  /// Topological order over live nodes; cycles must pass through stateful
  /// nodes (Delay/Fifo/Counter), whose outputs act as sources.
  std::vector<int> topo_order() const;

  /// Consumers of each node (live nodes only): list of (node, pin).
  std::vector<std::vector<PinRef>> consumers() const;

  int live_count() const;
};

bool prim_stateful(Prim p);
/// Depth-0 delays are wires; only registered elements break cycles.
bool node_stateful(const DagNode& n);

/// Structural diagnostics: pin arity, driver validity, combinational
/// acyclicity, width-vs-range consistency. Empty result = well-formed.
std::vector<std::string> check_wellformed(const Dag& dag);

std::string dag_to_json(const Dag& dag);

/// Strongly connected component id per node (dead nodes get -1-ish values
/// but are never queried). Components are the cycle carriers.
std::vector<int> scc_components(const Dag& dag);

/// Minimal two's-complement / unsigned width for a range.
int width_for_range(const Interval& r);

}  // namespace tessera
