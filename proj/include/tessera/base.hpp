#pragma once

#include <cstdint>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace tessera {

using i64 = std::int64_t;
using Vec = std::vector<i64>;

/// Error in user input (spec files, CLI arguments). Exit code 1.
class SpecError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Violated internal invariant. Exit code 2.
class InternalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

#define TESSERA_CHECK(cond, msg)                                               \
  do {                                                                         \
    if (!(cond)) throw ::tessera::InternalError(std::string("invariant: ") +   \
                                                (msg));                        \
  } while (0)

inline i64 checked_add(i64 a, i64 b) {
  i64 r;
  if (__builtin_add_overflow(a, b, &r))
    throw SpecError("integer overflow in " + std::to_string(a) + " + " +
                    std::to_string(b));
  return r;
}

inline i64 checked_mul(i64 a, i64 b) {
  i64 r;
  if (__builtin_mul_overflow(a, b, &r))
    throw SpecError("integer overflow in " + std::to_string(a) + " * " +
                    std::to_string(b));
  return r;
}

inline i64 vec_product(const Vec& v) {
  i64 p = 1;
  for (i64 x : v) p = checked_mul(p, x);
  return p;
}

inline i64 dot(const Vec& a, const Vec& b) {
  TESSERA_CHECK(a.size() == b.size(), "dot: length mismatch");
  i64 s = 0;
  for (size_t i = 0; i < a.size(); ++i) s = checked_add(s, checked_mul(a[i], b[i]));
  return s;
}

/// Iterates the rectangular box [0, shape) in row-major (lexicographic) order.
/// Calls fn(point) for every point; an empty shape yields one call with {}.
template <class Fn>
void for_each_point(const Vec& shape, Fn&& fn) {
  Vec p(shape.size(), 0);
  for (i64 d : shape)
    if (d <= 0) return;
  while (true) {
    fn(const_cast<const Vec&>(p));
    int i = static_cast<int>(shape.size()) - 1;
    for (; i >= 0; --i) {
      if (++p[i] < shape[i]) break;
      p[i] = 0;
    }
    if (i < 0) return;
  }
}

inline std::string vec_str(const Vec& v) {
  std::string s = "(";
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(v[i]);
  }
  return s + ")";
}

/// Row-major linearization of coordinate `p` within box `shape`.
inline i64 linearize(const Vec& p, const Vec& shape) {
  TESSERA_CHECK(p.size() == shape.size(), "linearize: rank mismatch");
  i64 idx = 0;
  for (size_t i = 0; i < p.size(); ++i) idx = checked_add(checked_mul(idx, shape[i]), p[i]);
  return idx;
}

inline Vec delinearize(i64 idx, const Vec& shape) {
  Vec p(shape.size(), 0);
  for (size_t i = shape.size(); i-- > 0;) {
    p[i] = idx % shape[i];
    idx /= shape[i];
  }
  return p;
}

}  // namespace tessera
