#pragma once

#include <map>
#include <string>
#include <vector>

#include "tessera/adg.hpp"
#include "tessera/codegen.hpp"
#include "tessera/config.hpp"
#include "tessera/emit.hpp"
#include "tessera/parse.hpp"
#include "tessera/passes.hpp"
#include "tessera/sim.hpp"

namespace tessera {

inline constexpr const char* kToolVersion = "0.1.0";

struct GenerateOptions {
  std::vector<std::string> passes = kOptionalPasses;  // optional passes to run
  bool dump_adg = false;
  bool dump_dag = false;
  std::string dump_after;  // pass name
};

struct DesignOutputs {
  FusedDesignSpec spec;
  Adg adg;
  Dag raw_dag;  // codegen output before any pass
  Dag dag;      // final, width-inferred
  std::vector<std::pair<std::string, CostReport>> stage_costs;
  std::map<std::string, std::string> dumps;  // name -> json text
};

/// Front end: solve, plan, bank, switch, assemble; includes the wall-clock
/// bank-collision guard that rejects designs the memory model cannot serve.
Adg run_frontend(const FusedDesignSpec& spec);

DesignOutputs generate_design(const FusedDesignSpec& spec,
                              const GenerateOptions& opts = {});

/// `analyze` subcommand payload: reuse solutions, plan adjacency, banking.
std::string analyze_json(const FusedDesignSpec& spec);

/// Deterministic run manifest (hash, version, passes, outputs, stage costs).
std::string manifest_json(const std::string& spec_text, const DesignOutputs& out,
                          const std::vector<std::string>& files);

std::string sha256_hex(const std::string& data);

/// Atomic file write (temp + rename).
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

std::string cost_table_text(const std::vector<std::pair<std::string, CostReport>>&);

}  // namespace tessera
