#pragma once

#include <string>
#include <vector>

#include "tessera/spec.hpp"

namespace tessera {

struct Diagnostic {
  int line = 0;           // 1-based; 0 when not attributable to a location
  std::string path;       // JSON field path, e.g. "dataflows[0].map_s"
  std::string message;
  std::string str() const;
};

struct ParseResult {
  bool ok = false;
  FusedDesignSpec spec;
  std::vector<Diagnostic> diagnostics;  // errors when !ok, warnings otherwise
};

/// Parses and validates a UTF-8 JSON design spec.
ParseResult parse_spec(const std::string& text);

/// Convenience: parse or throw SpecError with the first diagnostic.
FusedDesignSpec parse_spec_or_throw(const std::string& text);

/// Canonical JSON form; parse(serialize(parse(x))) == parse(x).
std::string serialize_spec(const FusedDesignSpec& spec);

/// Parses "Y += X * W" style sum-of-(shifted-)products bodies.
ComputeExpr parse_compute_expr(const std::string& text);

}  // namespace tessera
