#pragma once

#include "tessera/adg.hpp"
#include "tessera/dag.hpp"

namespace tessera {

/// Lowers the FU-level graph to primitives: one control unit (counter bank
/// plus window comparators) with store-and-forward distribution, per-FU
/// operand pipelines and arithmetic, reuse FIFOs, hold FIFOs, memory banks,
/// address generators and distribution switches. The result is ideal
/// (all structural latencies zero) and simulates bit-exactly against the
/// reference loop nest.
Dag codegen(const Adg& adg);

}  // namespace tessera
