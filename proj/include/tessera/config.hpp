#pragma once

#include <string>
#include <vector>

#include "tessera/banking.hpp"
#include "tessera/dag.hpp"
#include "tessera/spec.hpp"

namespace tessera {

/// One runtime-programmable field: a slice of the flat cfg input vector.
struct ConfigField {
  std::string name;   // node name plus parameter suffix
  int node = -1;
  i64 offset = 0;
  int width = 0;
  i64 value = 0;  // two's complement truncated to width
};

struct ConfigBlob {
  std::string dataflow;
  i64 total_bits = 0;
  std::vector<ConfigField> fields;

  std::string to_json() const;
  static ConfigBlob from_json(const std::string& text);
  /// Raw bit vector, little-endian bit order within the flat cfg bus.
  std::vector<uint8_t> bits() const;
};

/// The config layout is a pure function of the DAG: deterministic field
/// order, offsets and widths shared by the Verilog emitter and the blob.
std::vector<ConfigField> config_layout(const Dag& dag);

/// Populates the layout with one dataflow's values.
ConfigBlob emit_config(const FusedDesignSpec& spec, const std::string& dataflow,
                       const BankingPlan& banking, const Dag& dag);

/// Fixed coefficient width for address-generator config entries.
inline constexpr int kAddrCfgWidth = 32;

}  // namespace tessera
