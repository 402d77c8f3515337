#pragma once

#include <string>

#include "tessera/config.hpp"
#include "tessera/dag.hpp"

namespace tessera {

/// Structural Verilog-2001: one leaf module per primitive kind plus one top
/// module with a flat cfg vector, per-bank external load/readout ports, and
/// deterministic byte-for-byte output.
std::string emit_verilog(const Dag& dag);

}  // namespace tessera
