#pragma once

#include <cstddef>
#include <deque>
#include <functional>

#include "crat/core/array2.hpp"

namespace crat::ad {

class Graph;

/// Handle to a node recorded on a Graph. Cheap to copy; valid while its Graph lives.
class Var {
 public:
  Var() = default;

  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

  const Array2& value() const;
  const Array2& grad() const;
  std::size_t rows() const { return value().rows; }
  std::size_t cols() const { return value().cols; }
  bool requires_grad() const;

 private:
  friend class Graph;
  Var(Graph* g, std::size_t id) : graph_(g), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Tape of recorded operations. Nodes are appended in evaluation order, so the
/// tape itself is a topological order and backward is a single reverse sweep.
///
/// One graph belongs to one thread. Values are never mutated after recording.
class Graph {
 public:
  /// Receives the gradient flowing into a node and accumulates into its parents.
  using BackwardFn = std::function<void(Graph&, const Array2& out_grad)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Leaf that never receives a gradient.
  Var constant(Array2 value);
  /// Leaf that accumulates a gradient during backward.
  Var variable(Array2 value);

  /// Records an operation result. `requires_grad` should be the OR over the
  /// inputs; when false, `fn` is dropped.
  Var record(Array2 value, bool requires_grad, BackwardFn fn);

  const Array2& value(const Var& v) const { return nodes_[v.id()].value; }
  /// Gradient of a node; all zeros if nothing flowed into it.
  const Array2& grad(const Var& v) const;
  bool requires_grad(const Var& v) const { return nodes_[v.id()].requires_grad; }

  /// Adds `contribution` into the gradient of `v` (no-op for constants).
  void accumulate(const Var& v, const Array2& contribution);
  /// Mutable gradient buffer of `v`, zero-initialized on first access.
  Array2& grad_buffer(const Var& v);

  /// Reverse sweep from a scalar (1×1) loss. Gradients accumulate across calls.
  void backward(const Var& loss);
  void zero_grad();

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Array2 value;
    mutable Array2 grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  Node& node(const Var& v) { return nodes_[v.id()]; }

  std::deque<Node> nodes_;
};

inline const Array2& Var::value() const { return graph_->value(*this); }
inline const Array2& Var::grad() const { return graph_->grad(*this); }
inline bool Var::requires_grad() const { return graph_->requires_grad(*this); }

}  // namespace crat::ad
