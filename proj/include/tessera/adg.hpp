#pragma once

#include <string>
#include <vector>

#include "tessera/banking.hpp"
#include "tessera/plan.hpp"
#include "tessera/spec.hpp"

namespace tessera {

/// FU-level architecture description graph: the front end's hand-off to
/// codegen. Widths and latencies are deliberately absent (ideal model).
struct Adg {
  FusedDesignSpec spec;
  Vec fu_grid;                 // physical array shape
  InterconnectPlan plan;
  BankingPlan banking;
  SwitchFabric fabric;

  const TensorPlan& tensor_plan(const std::string& name) const;
};

/// Assembles and validates the ADG. Throws InternalError when the plan and
/// fabric disagree (e.g. a data node without switch connectivity).
Adg build_adg(const FusedDesignSpec& spec, InterconnectPlan plan,
              BankingPlan banking, SwitchFabric fabric);

/// Structural invariants: per dataflow per tensor the active edges form a
/// forest with one active inbound per FU; data nodes appear in the fabric.
std::vector<std::string> check_adg(const Adg& adg);

std::string adg_to_json(const Adg& adg);

}  // namespace tessera
