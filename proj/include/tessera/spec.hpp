#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tessera/affine.hpp"

namespace tessera {

enum class TensorRole { Input, Output };

struct TensorDecl {
  std::string name;
  TensorRole role = TensorRole::Input;
  AffineMap access;        // n_D rows, n_I cols
  int element_width = 8;   // bits
  bool element_signed = true;
};

/// Sum-of-(shifted-)products expression tree. Leaves name input tensors;
/// interior nodes are multiply or shift-left. Reduction operator is add.
struct ComputeExpr {
  enum class Op { Operand, Mul, Shl };
  struct Node {
    Op op = Op::Operand;
    std::string tensor;  // Operand only
    std::shared_ptr<Node> lhs, rhs;
  };
  std::string accumulator;  // the unique output tensor
  std::shared_ptr<Node> root;
  std::string text;  // original "Y += X * W" form, kept for round-trips

  static constexpr int kMaxDepth = 4;
};

struct WorkloadSpec {
  std::vector<std::string> iter_dims;  // n_I names
  std::vector<TensorDecl> tensors;
  ComputeExpr compute;

  int n_iter() const { return int(iter_dims.size()); }
  const TensorDecl& tensor(const std::string& name) const;
  const TensorDecl& output_tensor() const;
  std::vector<const TensorDecl*> input_tensors() const;
};

struct DataflowSpec {
  std::string name;
  Vec for_sizes;   // R_T, lexicographic outermost-first
  Vec par_sizes;   // R_S
  AffineMap map_t; // n_I x n_T
  AffineMap map_s; // n_I x n_S
  Vec control;     // c, length n_S

  int n_t() const { return int(for_sizes.size()); }
  int n_s() const { return int(par_sizes.size()); }

  /// f_{TS->I} as one (n_I) x (n_T + n_S) map.
  AffineMap map_ts() const { return map_t.hcat(map_s); }
};

struct HardwareConfig {
  i64 d_s = 1;                          // |Δs|_inf bound
  std::optional<i64> root_penalty;      // arborescence super-root cost; auto if absent
  std::map<std::string, int> data_width_overrides;
  bool strict_delay_bias = false;       // Eq. 7 printed constraint mode
  bool chains_longest_first = false;    // alternative Fig. 5 processing order
};

struct FusedDesignSpec {
  WorkloadSpec workload;
  std::vector<DataflowSpec> dataflows;
  HardwareConfig hardware;

  /// Element-wise max of all par_sizes: the physical FU array shape.
  Vec fu_array_shape() const;
  /// Iteration-domain extent per dim: 1 + max value the dim attains
  /// under any dataflow (the rectangle the workload runs over).
  Vec iter_extents() const;
  /// Tensor extent per data dim, over the fused iteration rectangle.
  Vec tensor_extents(const TensorDecl& t) const;

  const DataflowSpec& dataflow(const std::string& name) const;
  int dataflow_index(const std::string& name) const;
};

// ---- ir operations ---------------------------------------------------------

/// Eq. 3 mixed-radix timestamp. Components must lie in [0, R_T).
i64 timestamp_scalar(const Vec& t, const Vec& for_sizes);
/// Inverse of timestamp_scalar.
Vec timestamp_vector(i64 scalar, const Vec& for_sizes);
/// Signed scalar extension of a timestamp delta: sum dt_j * prod_{l>j} R_l.
i64 timestamp_scalar_ext(const Vec& dt, const Vec& for_sizes);
/// Eq. 4/5 control bias s.c (and delta form).
i64 timestamp_bias(const Vec& s, const Vec& control);

/// f_{TS->D} for one tensor: access ∘ [map_t | map_s].
AffineMap compose_access(const WorkloadSpec& w, const DataflowSpec& df,
                         const std::string& tensor);

/// Structural validation of a parsed spec. Throws SpecError on violation;
/// warnings (e.g. skipped coverage check) are appended to `warnings`.
void validate_spec(const FusedDesignSpec& spec, std::vector<std::string>* warnings,
                   i64 coverage_enum_bound = 1000000);

/// Reference loop-nest evaluation of a compute expression at one point.
i64 eval_compute(const ComputeExpr::Node& n,
                 const std::map<std::string, i64>& operands);

std::vector<std::string> compute_operand_order(const ComputeExpr& e);

}  // namespace tessera
