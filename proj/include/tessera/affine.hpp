#pragma once

#include <utility>

#include "tessera/base.hpp"

namespace tessera {

/// Integer affine map d = M*x + b. All arithmetic is exact 64-bit with
/// overflow checks; there are no rationals anywhere in the IR.
class AffineMap {
public:
  AffineMap() = default;
  AffineMap(int n_out, int n_in)
      : n_out_(n_out), n_in_(n_in), mat_(size_t(n_out) * n_in, 0), bias_(n_out, 0) {}

  static AffineMap identity(int n) {
    AffineMap m(n, n);
    for (int i = 0; i < n; ++i) m.at(i, i) = 1;
    return m;
  }

  int n_out() const { return n_out_; }
  int n_in() const { return n_in_; }

  i64& at(int r, int c) { return mat_[size_t(r) * n_in_ + c]; }
  i64 at(int r, int c) const { return mat_[size_t(r) * n_in_ + c]; }
  i64& bias(int r) { return bias_[r]; }
  i64 bias(int r) const { return bias_[r]; }
  const Vec& bias_vec() const { return bias_; }
  Vec& bias_vec() { return bias_; }

  Vec apply(const Vec& x) const {
    TESSERA_CHECK(int(x.size()) == n_in_, "AffineMap::apply: arity mismatch");
    Vec d(n_out_);
    for (int r = 0; r < n_out_; ++r) {
      i64 acc = bias_[r];
      for (int c = 0; c < n_in_; ++c) acc = checked_add(acc, checked_mul(at(r, c), x[c]));
      d[r] = acc;
    }
    return d;
  }

  /// Linear part only: M*x (bias ignored). Used for delta arithmetic.
  Vec apply_linear(const Vec& x) const {
    TESSERA_CHECK(int(x.size()) == n_in_, "AffineMap::apply_linear: arity mismatch");
    Vec d(n_out_, 0);
    for (int r = 0; r < n_out_; ++r)
      for (int c = 0; c < n_in_; ++c)
        d[r] = checked_add(d[r], checked_mul(at(r, c), x[c]));
    return d;
  }

  /// this ∘ inner: (M1*(M2*x + b2) + b1).
  AffineMap compose(const AffineMap& inner) const {
    TESSERA_CHECK(n_in_ == inner.n_out_, "AffineMap::compose: rank mismatch");
    AffineMap out(n_out_, inner.n_in_);
    for (int r = 0; r < n_out_; ++r) {
      i64 b = bias_[r];
      for (int k = 0; k < n_in_; ++k) {
        b = checked_add(b, checked_mul(at(r, k), inner.bias_[k]));
        for (int c = 0; c < inner.n_in_; ++c)
          out.at(r, c) = checked_add(out.at(r, c), checked_mul(at(r, k), inner.at(k, c)));
      }
      out.bias_[r] = b;
    }
    return out;
  }

  /// [this | rhs], stacking columns; biases add (rhs bias folded in).
  AffineMap hcat(const AffineMap& rhs) const {
    TESSERA_CHECK(n_out_ == rhs.n_out_, "AffineMap::hcat: row mismatch");
    AffineMap out(n_out_, n_in_ + rhs.n_in_);
    for (int r = 0; r < n_out_; ++r) {
      for (int c = 0; c < n_in_; ++c) out.at(r, c) = at(r, c);
      for (int c = 0; c < rhs.n_in_; ++c) out.at(r, n_in_ + c) = rhs.at(r, c);
      out.bias_[r] = checked_add(bias_[r], rhs.bias_[r]);
    }
    return out;
  }

  /// Columns [lo, hi) as a sub-map; bias kept iff keep_bias.
  AffineMap slice_cols(int lo, int hi, bool keep_bias) const {
    AffineMap out(n_out_, hi - lo);
    for (int r = 0; r < n_out_; ++r) {
      for (int c = lo; c < hi; ++c) out.at(r, c - lo) = at(r, c);
      out.bias_[r] = keep_bias ? bias_[r] : 0;
    }
    return out;
  }

  /// Extrema of each output over the box [0, shape). Affine separability:
  /// per input dim the extremum is at 0 or shape-1.
  std::pair<Vec, Vec> range_over_box(const Vec& shape) const {
    TESSERA_CHECK(int(shape.size()) == n_in_, "range_over_box: rank mismatch");
    Vec lo(bias_), hi(bias_);
    for (int r = 0; r < n_out_; ++r)
      for (int c = 0; c < n_in_; ++c) {
        i64 span = checked_mul(at(r, c), shape[c] - 1);
        if (span >= 0) hi[r] = checked_add(hi[r], span);
        else lo[r] = checked_add(lo[r], span);
      }
    return {lo, hi};
  }

  bool operator==(const AffineMap& o) const {
    return n_out_ == o.n_out_ && n_in_ == o.n_in_ && mat_ == o.mat_ && bias_ == o.bias_;
  }

private:
  int n_out_ = 0, n_in_ = 0;
  Vec mat_;
  Vec bias_;
};

}  // namespace tessera
