#include "tessera/reuse.hpp"

#include <algorithm>

namespace tessera {

namespace {

bool is_zero(const Vec& v) {
  return std::all_of(v.begin(), v.end(), [](i64 x) { return x == 0; });
}

/// Enumerates the box of delta vectors with |d_i| <= bound_i, fn(delta).
template <class Fn>
void for_each_delta(const Vec& bounds, Fn&& fn) {
  Vec shape(bounds.size());
  for (size_t i = 0; i < bounds.size(); ++i) shape[i] = 2 * bounds[i] + 1;
  for_each_point(shape, [&](const Vec& p) {
    Vec d(p.size());
    for (size_t i = 0; i < p.size(); ++i) d[i] = p[i] - bounds[i];
    fn(d);
  });
}

}  // namespace

Window window_of(const Vec& delta_t, const Vec& for_sizes) {
  Window w;
  w.lo.resize(delta_t.size());
  w.hi.resize(delta_t.size());
  for (size_t j = 0; j < delta_t.size(); ++j) {
    w.lo[j] = std::max<i64>(0, delta_t[j]);
    w.hi[j] = std::min<i64>(for_sizes[j] - 1, for_sizes[j] - 1 + delta_t[j]);
  }
  return w;
}

std::vector<ReuseSolution> solve_direct(const FusedDesignSpec& spec,
                                        const DataflowSpec& df,
                                        const std::string& tensor) {
  AffineMap md_s = spec.workload.tensor(tensor).access.compose(df.map_s);
  Vec bounds(df.n_s(), spec.hardware.d_s);
  std::vector<ReuseSolution> out;
  for_each_delta(bounds, [&](const Vec& ds) {
    if (is_zero(ds)) return;
    if (!is_zero(md_s.apply_linear(ds))) return;
    i64 bias = timestamp_bias(ds, df.control);
    if (bias < 0) return;
    ReuseSolution sol;
    sol.tensor = tensor;
    sol.kind = ReuseKind::Direct;
    sol.delta_s = ds;
    sol.delta_t.assign(df.n_t(), 0);
    sol.fifo_depth = bias;
    out.push_back(std::move(sol));
  });
  return out;
}

std::vector<ReuseSolution> solve_delay(const FusedDesignSpec& spec,
                                       const DataflowSpec& df,
                                       const std::string& tensor) {
  const AffineMap& access = spec.workload.tensor(tensor).access;
  AffineMap md_t = access.compose(df.map_t);
  AffineMap md_s = access.compose(df.map_s);
  Vec s_bounds(df.n_s(), spec.hardware.d_s);
  Vec t_bounds(df.n_t());
  for (int j = 0; j < df.n_t(); ++j) t_bounds[j] = df.for_sizes[j] - 1;

  std::vector<ReuseSolution> out;
  for_each_delta(s_bounds, [&](const Vec& ds) {
    i64 bias = timestamp_bias(ds, df.control);
    if (spec.hardware.strict_delay_bias && bias < 0) return;
    Vec rhs = md_s.apply_linear(ds);
    ReuseSolution best;
    bool found = false;
    for_each_delta(t_bounds, [&](const Vec& dt) {
      if (is_zero(dt)) return;  // delta_t = 0 is the direct case
      Vec lhs = md_t.apply_linear(dt);
      for (size_t r = 0; r < lhs.size(); ++r)
        if (checked_add(lhs[r], rhs[r]) != 0) return;
      i64 depth = checked_add(timestamp_scalar_ext(dt, df.for_sizes), bias);
      if (depth < 0) return;
      if (!found || depth < best.fifo_depth ||
          (depth == best.fifo_depth && dt < best.delta_t)) {
        if (found && depth == best.fifo_depth) {
          // keep the lex-smaller representative, remember the other
          Vec prev = best.delta_t;
          best.same_depth_alts.insert(best.same_depth_alts.begin(), prev);
          best.delta_t = dt;
        } else {
          best.same_depth_alts.clear();
          best.delta_t = dt;
        }
        best.fifo_depth = depth;
        found = true;
      } else if (depth == best.fifo_depth) {
        best.same_depth_alts.push_back(dt);
      }
    });
    if (!found) return;
    best.tensor = tensor;
    best.kind = ReuseKind::Delay;
    best.delta_s = ds;
    out.push_back(std::move(best));
  });
  return out;
}

bool reuse_equation_holds(const FusedDesignSpec& spec, const DataflowSpec& df,
                          const ReuseSolution& sol) {
  const AffineMap& access = spec.workload.tensor(sol.tensor).access;
  Vec lhs = access.compose(df.map_t).apply_linear(sol.delta_t);
  Vec rhs = access.compose(df.map_s).apply_linear(sol.delta_s);
  for (size_t r = 0; r < lhs.size(); ++r)
    if (lhs[r] + rhs[r] != 0) return false;
  if (sol.kind == ReuseKind::Direct) {
    if (!std::all_of(sol.delta_t.begin(), sol.delta_t.end(),
                     [](i64 x) { return x == 0; }))
      return false;
    return sol.fifo_depth == timestamp_bias(sol.delta_s, df.control) &&
           sol.fifo_depth >= 0;
  }
  i64 depth = timestamp_scalar_ext(sol.delta_t, df.for_sizes) +
              timestamp_bias(sol.delta_s, df.control);
  return depth == sol.fifo_depth && depth >= 0;
}

}  // namespace tessera
