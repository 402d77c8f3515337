#pragma once

#include <cstdio>
#include <cstdlib>
#include <string>

#include "tessera/base.hpp"

namespace tessera_test {

inline std::string designs_dir() {
  const char* env = std::getenv("TESSERA_DESIGNS");
  return env ? env : "designs";
}

inline std::string slurp(const std::string& path) {
  FILE* f = fopen(path.c_str(), "rb");
  if (!f) throw std::runtime_error("cannot open " + path);
  std::string out;
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof buf, f)) > 0) out.append(buf, n);
  fclose(f);
  return out;
}

/// xorshift64* generator: deterministic across platforms.
struct Rng {
  uint64_t state;
  explicit Rng(uint64_t seed) : state(seed * 2685821657736338717ull + 1) {}
  uint64_t next() {
    state ^= state >> 12;
    state ^= state << 25;
    state ^= state >> 27;
    return state * 2685821657736338717ull;
  }
  tessera::i64 uniform(tessera::i64 lo, tessera::i64 hi) {  // inclusive
    return lo + tessera::i64(next() % uint64_t(hi - lo + 1));
  }
};

}  // namespace tessera_test
