#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>

#include "tessera/parse.hpp"
#include "tessera/spec.hpp"

using namespace tessera;

namespace {

std::string designs_dir() {
  const char* env = std::getenv("TESSERA_DESIGNS");
  return env ? env : "designs";
}

std::string slurp(const std::string& path) {
  FILE* f = fopen(path.c_str(), "rb");
  REQUIRE(f != nullptr);
  std::string out;
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof buf, f)) > 0) out.append(buf, n);
  fclose(f);
  return out;
}

}  // namespace

TEST_CASE("gemm json parses with the documented shape") {
  ParseResult r = parse_spec(slurp(designs_dir() + "/gemm_tpu.json"));
  REQUIRE(r.ok);
  CHECK(r.spec.workload.n_iter() == 3);
  CHECK(r.spec.dataflows.size() == 1);
  CHECK(r.spec.dataflows[0].n_t() == 4);
  CHECK(r.spec.dataflows[0].n_s() == 2);
  CHECK(r.spec.workload.output_tensor().name == "Y");
}

TEST_CASE("empty dataflow list is rejected") {
  ParseResult r = parse_spec(R"({
    "workload": {"iter_dims": ["i"], "tensors": [
      {"name": "X", "role": "input", "matrix": [[1]], "width": 8, "signed": true},
      {"name": "Y", "role": "output", "matrix": [[1]], "width": 8, "signed": true}],
      "compute": {"out": "Y", "expr": "Y += X"}},
    "dataflows": []})");
  REQUIRE_FALSE(r.ok);
  bool mentions = false;
  for (const auto& d : r.diagnostics)
    mentions |= d.str().find("dataflows must be non-empty") != std::string::npos;
  CHECK(mentions);
}

TEST_CASE("map_s row mismatch names the field path") {
  // map_s with 4 rows against n_I = 3
  ParseResult r = parse_spec(R"({
    "workload": {"iter_dims": ["i", "j", "k"], "tensors": [
      {"name": "X", "role": "input", "matrix": [[1,0,0]], "width": 8, "signed": true},
      {"name": "Y", "role": "output", "matrix": [[1,0,0]], "width": 8, "signed": true}],
      "compute": {"out": "Y", "expr": "Y += X"}},
    "dataflows": [{"name": "a", "for_sizes": [2,2,2], "par_sizes": [2],
      "M_T": [[1,0,0],[0,1,0],[0,0,1]],
      "M_S": [[0],[0],[1],[0]],
      "control": [0]}]})");
  REQUIRE_FALSE(r.ok);
  bool named = false;
  for (const auto& d : r.diagnostics)
    named |= d.str().find("dataflows[0]") != std::string::npos;
  CHECK(named);
}

TEST_CASE("json parse errors carry line numbers") {
  ParseResult r = parse_spec("{\n  \"workload\": [,]\n}\n");
  REQUIRE_FALSE(r.ok);
  CHECK(r.diagnostics[0].line >= 2);
}

TEST_CASE("duplicate tensor names rejected") {
  ParseResult r = parse_spec(R"({
    "workload": {"iter_dims": ["i"], "tensors": [
      {"name": "X", "role": "input", "matrix": [[1]], "width": 8, "signed": true},
      {"name": "X", "role": "output", "matrix": [[1]], "width": 8, "signed": true}],
      "compute": {"out": "X", "expr": "X += X"}},
    "dataflows": [{"name": "a", "for_sizes": [2], "par_sizes": [1],
      "M_T": [[1]], "M_S": [[0]], "control": [0]}]})");
  REQUIRE_FALSE(r.ok);
}

TEST_CASE("timestamp scalar matches the mixed-radix definition") {
  CHECK(timestamp_scalar({0, 0, 0}, {2, 3, 4}) == 0);
  CHECK(timestamp_scalar({1, 2, 3}, {2, 3, 4}) == 23);
  CHECK_THROWS_AS(timestamp_scalar({2, 0, 0}, {2, 3, 4}), SpecError);
}

TEST_CASE("timestamp scalar is a bijection over the domain") {
  Vec sizes{2, 3, 4};
  std::vector<char> seen(24, 0);
  for_each_point(sizes, [&](const Vec& t) {
    i64 s = timestamp_scalar(t, sizes);
    REQUIRE(s >= 0);
    REQUIRE(s < 24);
    CHECK_FALSE(seen[size_t(s)]);
    seen[size_t(s)] = 1;
    CHECK(timestamp_vector(s, sizes) == t);
    CHECK(timestamp_scalar(timestamp_vector(s, sizes), sizes) == s);
  });
}

TEST_CASE("timestamp scalar is lexicographically monotone") {
  Vec sizes{3, 2, 4};
  Vec prev;
  i64 prev_s = -1;
  for_each_point(sizes, [&](const Vec& t) {
    i64 s = timestamp_scalar(t, sizes);
    if (!prev.empty()) {
      CHECK(prev < t);
      CHECK(prev_s < s);
    }
    prev = t;
    prev_s = s;
  });
}

TEST_CASE("timestamp bias is the control dot product") {
  CHECK(timestamp_bias({5, 9}, {0, 0}) == 0);
  CHECK(timestamp_bias({2, 3}, {1, 1}) == 5);
  // delta form rejecting the backward direct solution
  CHECK(timestamp_bias({0, -1}, {1, 1}) == -1);
}

TEST_CASE("compose_access equals access of the dataflow map") {
  auto spec = parse_spec_or_throw(slurp(designs_dir() + "/gemm_tpu.json"));
  const DataflowSpec& df = spec.dataflows[0];
  for (const auto& tensor : {"X", "W", "Y"}) {
    AffineMap composed = compose_access(spec.workload, df, tensor);
    CHECK(composed.n_out() == 2);
    CHECK(composed.n_in() == df.n_t() + df.n_s());
    const AffineMap& access = spec.workload.tensor(tensor).access;
    AffineMap ts = df.map_ts();
    Vec shape = df.for_sizes;
    shape.insert(shape.end(), df.par_sizes.begin(), df.par_sizes.end());
    for_each_point(shape, [&](const Vec& p) {
      CHECK(composed.apply(p) == access.apply(ts.apply(p)));
    });
  }
}

TEST_CASE("identity composed with identity is identity") {
  WorkloadSpec w;
  w.iter_dims = {"a", "b"};
  TensorDecl t;
  t.name = "X";
  t.access = AffineMap::identity(2);
  w.tensors.push_back(t);
  DataflowSpec df;
  df.name = "id";
  df.for_sizes = {4, 4};
  df.par_sizes = {1};
  df.map_t = AffineMap::identity(2);
  df.map_s = AffineMap(2, 1);
  df.control = {0};
  AffineMap c = compose_access(w, df, "X");
  for (int r = 0; r < 2; ++r)
    for (int cc = 0; cc < 2; ++cc) CHECK(c.at(r, cc) == (r == cc ? 1 : 0));
}

TEST_CASE("conv composed access matches pointwise evaluation at random points") {
  auto spec = parse_spec_or_throw(slurp(designs_dir() + "/conv_shidiannao.json"));
  const DataflowSpec& df = spec.dataflows[0];
  AffineMap composed = compose_access(spec.workload, df, "X");
  AffineMap ts = df.map_ts();
  const AffineMap& access = spec.workload.tensor("X").access;
  uint64_t state = 12345;
  auto rnd = [&](i64 m) {
    state = state * 6364136223846793005ull + 1442695040888963407ull;
    return i64((state >> 33) % uint64_t(m));
  };
  for (int trial = 0; trial < 100; ++trial) {
    Vec p;
    for (i64 r : df.for_sizes) p.push_back(rnd(r));
    for (i64 r : df.par_sizes) p.push_back(rnd(r));
    CHECK(composed.apply(p) == access.apply(ts.apply(p)));
  }
}

TEST_CASE("unknown tensor name raises") {
  auto spec = parse_spec_or_throw(slurp(designs_dir() + "/gemm_tpu.json"));
  CHECK_THROWS_AS(compose_access(spec.workload, spec.dataflows[0], "Q"), SpecError);
}

TEST_CASE("parse -> serialize -> parse is identity on the canonical form") {
  for (const auto* name :
       {"gemm_tpu.json", "gemm_4x4.json", "conv_shidiannao.json", "conv_fig6.json",
        "mttkrp.json", "gemm_fused.json", "bitfusion_shift.json"}) {
    auto spec = parse_spec_or_throw(slurp(designs_dir() + "/" + name));
    std::string ser = serialize_spec(spec);
    auto spec2 = parse_spec_or_throw(ser);
    CHECK(serialize_spec(spec2) == ser);
  }
}

TEST_CASE("compute expression parser handles shifted products") {
  ComputeExpr e = parse_compute_expr("Y += (A * B) << S");
  CHECK(e.accumulator == "Y");
  REQUIRE(e.root != nullptr);
  CHECK(e.root->op == ComputeExpr::Op::Shl);
  CHECK(e.root->lhs->op == ComputeExpr::Op::Mul);
  std::map<std::string, i64> ops{{"A", -3}, {"B", 5}, {"S", 2}};
  CHECK(eval_compute(*e.root, ops) == -60);
  CHECK_THROWS_AS(parse_compute_expr("Y = A * B"), SpecError);
  CHECK_THROWS_AS(parse_compute_expr("Y += A +"), SpecError);
}

TEST_CASE("uncovered iteration points are rejected") {
  // k dimension reaches 3 under the bigger dataflow but the smaller one
  // only covers k < 2
  ParseResult r = parse_spec(R"({
    "workload": {"iter_dims": ["k"], "tensors": [
      {"name": "X", "role": "input", "matrix": [[1]], "width": 8, "signed": true},
      {"name": "Y", "role": "output", "matrix": [[0]], "width": 16, "signed": true}],
      "compute": {"out": "Y", "expr": "Y += X"}},
    "dataflows": [
      {"name": "big", "for_sizes": [4], "par_sizes": [1], "M_T": [[1]], "M_S": [[0]], "control": [0]},
      {"name": "small", "for_sizes": [2], "par_sizes": [1], "M_T": [[1]], "M_S": [[0]], "control": [0]}
    ]})");
  REQUIRE_FALSE(r.ok);
}
