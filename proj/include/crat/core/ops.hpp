#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "crat/core/graph.hpp"

/// Differentiable primitives over 2-D arrays. Every function records its
/// result on the graph that owns its inputs; all inputs must share a graph.
/// Shape violations throw crat::ShapeError naming the offending shapes.
namespace crat::ad {

Var matmul(const Var& a, const Var& b);     // a·b
Var matmul_bt(const Var& a, const Var& b);  // a·bᵀ

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);  // elementwise
/// a + broadcast of a 1×cols row to every row of a.
Var add_row(const Var& a, const Var& row);
Var scale(const Var& a, double s);

Var sigmoid(const Var& a);
Var tanh(const Var& a);
/// ln(1 + eˣ), evaluated as x for x > 20.
Var softplus(const Var& a);
Var relu(const Var& a);
/// Softmax along each row, max-shifted.
Var row_softmax(const Var& a);

Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(const Var& a, std::size_t begin, std::size_t end);
Var slice_rows(const Var& a, std::size_t begin, std::size_t end);
/// out[r] = a[index[r]]
Var gather_rows(const Var& a, std::span<const std::size_t> index);
/// out[index[r]] += a[r], out has `out_rows` rows.
Var scatter_add_rows(const Var& a, std::span<const std::size_t> index, std::size_t out_rows);

Var sum(const Var& a);   // 1×1
Var mean(const Var& a);  // 1×1

struct BatchStats {
  Array2 mean;      // 1×C
  Array2 variance;  // 1×C, biased
};

/// Normalizes each column over the rows using the batch statistics; gradients
/// flow through the statistics. `stats`, when given, receives them.
Var batch_norm_train(const Var& x, const Var& gamma, const Var& beta, double eps,
                     BatchStats* stats = nullptr);
/// Normalizes each column with fixed running statistics.
Var batch_norm_eval(const Var& x, const Var& gamma, const Var& beta, const Array2& running_mean,
                    const Array2& running_var, double eps);
/// Normalizes each row within `groups` contiguous channel groups, then applies
/// the per-channel affine map.
Var group_norm(const Var& x, const Var& gamma, const Var& beta, std::size_t groups, double eps);

/// Mean over all elements of the smooth-L1 penalty of (pred − target):
/// 0.5·x²/β for |x| < β, |x| − 0.5·β otherwise. Returns 1×1.
Var smooth_l1(const Var& pred, const Array2& target, double beta);
/// Same penalty averaged within each row. Returns rows×1.
Var row_smooth_l1(const Var& pred, const Array2& target, double beta);

/// The generic primitive set, dispatchable by tag.
enum class Primitive {
  matmul,
  add,
  concat_cols,
  elementwise_mul,
  sigmoid,
  tanh,
  softplus,
  relu,
  row_softmax,
  scale,
};

std::string_view primitive_name(Primitive p);
/// Arity of a primitive (concat_cols reports 2; it accepts any count ≥ 1).
std::size_t primitive_arity(Primitive p);
Var forward_primitive(Primitive op, std::span<const Var> inputs, double scale_factor = 1.0);

inline constexpr Primitive kAllPrimitives[] = {
    Primitive::matmul,  Primitive::add,      Primitive::concat_cols, Primitive::elementwise_mul,
    Primitive::sigmoid, Primitive::tanh,     Primitive::softplus,    Primitive::relu,
    Primitive::row_softmax, Primitive::scale,
};

}  // namespace crat::ad
