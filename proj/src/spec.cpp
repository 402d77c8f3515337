#include "tessera/spec.hpp"

#include <algorithm>
#include <set>

namespace tessera {

const TensorDecl& WorkloadSpec::tensor(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t;
  throw SpecError("unknown tensor '" + name + "'");
}

const TensorDecl& WorkloadSpec::output_tensor() const {
  for (const auto& t : tensors)
    if (t.role == TensorRole::Output) return t;
  throw SpecError("workload has no output tensor");
}

std::vector<const TensorDecl*> WorkloadSpec::input_tensors() const {
  std::vector<const TensorDecl*> out;
  for (const auto& t : tensors)
    if (t.role == TensorRole::Input) out.push_back(&t);
  return out;
}

Vec FusedDesignSpec::fu_array_shape() const {
  TESSERA_CHECK(!dataflows.empty(), "fu_array_shape on empty dataflow list");
  Vec shape = dataflows[0].par_sizes;
  for (const auto& df : dataflows)
    for (size_t i = 0; i < shape.size(); ++i)
      shape[i] = std::max(shape[i], df.par_sizes[i]);
  return shape;
}

Vec FusedDesignSpec::iter_extents() const {
  int n_i = workload.n_iter();
  Vec ext(n_i, 1);
  for (const auto& df : dataflows) {
    AffineMap ts = df.map_ts();
    Vec shape = df.for_sizes;
    shape.insert(shape.end(), df.par_sizes.begin(), df.par_sizes.end());
    auto [lo, hi] = ts.range_over_box(shape);
    for (int d = 0; d < n_i; ++d) {
      if (lo[d] < 0)
        throw SpecError("dataflow '" + df.name + "' drives iteration dim '" +
                        workload.iter_dims[d] + "' below zero");
      ext[d] = std::max(ext[d], hi[d] + 1);
    }
  }
  return ext;
}

Vec FusedDesignSpec::tensor_extents(const TensorDecl& t) const {
  auto [lo, hi] = t.access.range_over_box(iter_extents());
  Vec ext(hi.size());
  for (size_t i = 0; i < hi.size(); ++i) {
    if (lo[i] < 0)
      throw SpecError("tensor '" + t.name + "' index dim " + std::to_string(i) +
                      " goes negative over the iteration domain");
    ext[i] = hi[i] + 1;
  }
  return ext;
}

const DataflowSpec& FusedDesignSpec::dataflow(const std::string& name) const {
  return dataflows[dataflow_index(name)];
}

int FusedDesignSpec::dataflow_index(const std::string& name) const {
  for (size_t i = 0; i < dataflows.size(); ++i)
    if (dataflows[i].name == name) return int(i);
  throw SpecError("unknown dataflow '" + name + "'");
}

i64 timestamp_scalar(const Vec& t, const Vec& for_sizes) {
  TESSERA_CHECK(t.size() == for_sizes.size(), "timestamp_scalar: rank mismatch");
  for (size_t i = 0; i < t.size(); ++i)
    if (t[i] < 0 || t[i] >= for_sizes[i])
      throw SpecError("timestamp component " + std::to_string(i) + " = " +
                      std::to_string(t[i]) + " out of range [0," +
                      std::to_string(for_sizes[i]) + ")");
  i64 s = 0;
  for (size_t i = 0; i < t.size(); ++i)
    s = checked_add(checked_mul(s, for_sizes[i]), t[i]);
  return s;
}

Vec timestamp_vector(i64 scalar, const Vec& for_sizes) {
  Vec t(for_sizes.size(), 0);
  for (size_t i = for_sizes.size(); i-- > 0;) {
    t[i] = scalar % for_sizes[i];
    scalar /= for_sizes[i];
  }
  return t;
}

i64 timestamp_scalar_ext(const Vec& dt, const Vec& for_sizes) {
  TESSERA_CHECK(dt.size() == for_sizes.size(), "timestamp_scalar_ext: rank mismatch");
  i64 s = 0;
  for (size_t i = 0; i < dt.size(); ++i)
    s = checked_add(checked_mul(s, for_sizes[i]), dt[i]);
  return s;
}

i64 timestamp_bias(const Vec& s, const Vec& control) { return dot(s, control); }

AffineMap compose_access(const WorkloadSpec& w, const DataflowSpec& df,
                         const std::string& tensor) {
  return w.tensor(tensor).access.compose(df.map_ts());
}

i64 eval_compute(const ComputeExpr::Node& n,
                 const std::map<std::string, i64>& operands) {
  switch (n.op) {
    case ComputeExpr::Op::Operand: {
      auto it = operands.find(n.tensor);
      TESSERA_CHECK(it != operands.end(), "missing operand " + n.tensor);
      return it->second;
    }
    case ComputeExpr::Op::Mul:
      return checked_mul(eval_compute(*n.lhs, operands), eval_compute(*n.rhs, operands));
    case ComputeExpr::Op::Shl: {
      i64 a = eval_compute(*n.lhs, operands);
      i64 b = eval_compute(*n.rhs, operands);
      if (b < 0 || b > 62) throw SpecError("shift amount out of range: " + std::to_string(b));
      return checked_mul(a, i64(1) << b);
    }
  }
  throw InternalError("eval_compute: bad op");
}

static void collect_operands(const ComputeExpr::Node& n, std::vector<std::string>& out) {
  if (n.op == ComputeExpr::Op::Operand) {
    out.push_back(n.tensor);
    return;
  }
  collect_operands(*n.lhs, out);
  collect_operands(*n.rhs, out);
}

std::vector<std::string> compute_operand_order(const ComputeExpr& e) {
  std::vector<std::string> out;
  if (e.root) collect_operands(*e.root, out);
  return out;
}

static int expr_depth(const ComputeExpr::Node& n) {
  if (n.op == ComputeExpr::Op::Operand) return 1;
  return 1 + std::max(expr_depth(*n.lhs), expr_depth(*n.rhs));
}

void validate_spec(const FusedDesignSpec& spec, std::vector<std::string>* warnings,
                   i64 coverage_enum_bound) {
  const WorkloadSpec& w = spec.workload;
  int n_i = w.n_iter();
  if (n_i == 0) throw SpecError("workload.iter_dims must be non-empty");
  {
    std::set<std::string> seen;
    for (const auto& d : w.iter_dims)
      if (!seen.insert(d).second)
        throw SpecError("duplicate iteration dim '" + d + "'");
  }
  if (w.tensors.empty()) throw SpecError("workload.tensors must be non-empty");
  int n_out = 0;
  std::set<std::string> tnames;
  for (size_t i = 0; i < w.tensors.size(); ++i) {
    const auto& t = w.tensors[i];
    std::string path = "workload.tensors[" + std::to_string(i) + "]";
    if (!tnames.insert(t.name).second)
      throw SpecError(path + ": duplicate tensor name '" + t.name + "'");
    if (t.access.n_in() != n_i)
      throw SpecError(path + ".matrix: has " + std::to_string(t.access.n_in()) +
                      " columns, workload has " + std::to_string(n_i) +
                      " iteration dims");
    if (t.element_width < 1 || t.element_width > 63)
      throw SpecError(path + ".width: must be in [1,63]");
    n_out += t.role == TensorRole::Output;
  }
  if (n_out != 1) throw SpecError("workload must declare exactly one output tensor");

  if (!w.compute.root) throw SpecError("workload.compute.expr missing");
  if (w.compute.accumulator != w.output_tensor().name)
    throw SpecError("compute.out '" + w.compute.accumulator +
                    "' is not the output tensor");
  if (expr_depth(*w.compute.root) > ComputeExpr::kMaxDepth)
    throw SpecError("compute expression deeper than " +
                    std::to_string(ComputeExpr::kMaxDepth));
  for (const auto& op : compute_operand_order(w.compute)) {
    const TensorDecl& t = w.tensor(op);  // throws on unknown
    if (t.role != TensorRole::Input)
      throw SpecError("compute expression reads non-input tensor '" + op + "'");
  }

  if (spec.dataflows.empty()) throw SpecError("dataflows must be non-empty");
  int n_s = spec.dataflows[0].n_s();
  std::set<std::string> dfnames;
  for (size_t k = 0; k < spec.dataflows.size(); ++k) {
    const auto& df = spec.dataflows[k];
    std::string path = "dataflows[" + std::to_string(k) + "]";
    if (!dfnames.insert(df.name).second)
      throw SpecError(path + ": duplicate dataflow name '" + df.name + "'");
    if (df.n_s() != n_s)
      throw SpecError(path + ".par_sizes: all dataflows must share n_S");
    if (df.for_sizes.empty()) throw SpecError(path + ".for_sizes: must be non-empty");
    for (i64 r : df.for_sizes)
      if (r <= 0) throw SpecError(path + ".for_sizes: entries must be positive");
    for (i64 r : df.par_sizes)
      if (r <= 0) throw SpecError(path + ".par_sizes: entries must be positive");
    if (df.map_t.n_out() != n_i || df.map_t.n_in() != df.n_t())
      throw SpecError(path + ".M_T: expected " + std::to_string(n_i) + "x" +
                      std::to_string(df.n_t()) + ", got " +
                      std::to_string(df.map_t.n_out()) + "x" +
                      std::to_string(df.map_t.n_in()));
    if (df.map_s.n_out() != n_i || df.map_s.n_in() != df.n_s())
      throw SpecError(path + ".M_S: expected " + std::to_string(n_i) + "x" +
                      std::to_string(df.n_s()) + ", got " +
                      std::to_string(df.map_s.n_out()) + "x" +
                      std::to_string(df.map_s.n_in()));
    if (int(df.control.size()) != df.n_s())
      throw SpecError(path + ".control: expected " + std::to_string(df.n_s()) +
                      " entries");
    for (int d = 0; d < n_i; ++d) {
      bool driven = false;
      for (int c = 0; c < df.n_t() && !driven; ++c) driven = df.map_t.at(d, c) != 0;
      for (int c = 0; c < df.n_s() && !driven; ++c) driven = df.map_s.at(d, c) != 0;
      if (!driven)
        throw SpecError(path + ": iteration dim '" + w.iter_dims[d] +
                        "' is driven by neither M_T nor M_S");
    }
  }
  if (spec.hardware.d_s < 0) throw SpecError("hardware.d_S must be >= 0");
  for (const auto& [name, width] : spec.hardware.data_width_overrides) {
    w.tensor(name);
    if (width < 1 || width > 63)
      throw SpecError("hardware.data_width['" + name + "'] must be in [1,63]");
  }

  // Coverage: every i in the fused rectangle is reachable by some (t, s)
  // of every dataflow. Exhaustive at desk scale, skipped (with a warning)
  // above the bound.
  Vec ext = spec.iter_extents();
  i64 domain = vec_product(ext);
  for (const auto& df : spec.dataflows) {
    Vec shape = df.for_sizes;
    shape.insert(shape.end(), df.par_sizes.begin(), df.par_sizes.end());
    i64 points = vec_product(shape);
    if (domain > coverage_enum_bound || points > coverage_enum_bound) {
      if (warnings)
        warnings->push_back("dataflow '" + df.name +
                            "': coverage check skipped (domain too large)");
      continue;
    }
    std::vector<char> hit(size_t(domain), 0);
    AffineMap ts = df.map_ts();
    for_each_point(shape, [&](const Vec& p) {
      Vec i = ts.apply(p);
      hit[size_t(linearize(i, ext))] = 1;
    });
    i64 missing = std::count(hit.begin(), hit.end(), 0);
    if (missing > 0)
      throw SpecError("dataflow '" + df.name + "' leaves " +
                      std::to_string(missing) +
                      " iteration points uncovered over the fused domain");
  }
}

}  // namespace tessera
