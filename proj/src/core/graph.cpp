#include "crat/core/graph.hpp"

#include "crat/core/errors.hpp"

namespace crat::ad {

Var Graph::constant(Array2 value) { return record(std::move(value), false, nullptr); }

Var Graph::variable(Array2 value) {
  nodes_.push_back(Node{std::move(value), Array2{}, true, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Graph::record(Array2 value, bool requires_grad, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

const Array2& Graph::grad(const Var& v) const {
  const Node& n = nodes_[v.id()];
  if (n.grad.empty() && !n.value.empty()) n.grad = Array2(n.value.rows, n.value.cols);
  return n.grad;
}

Array2& Graph::grad_buffer(const Var& v) {
  Node& n = node(v);
  if (n.grad.empty()) n.grad = Array2(n.value.rows, n.value.cols);
  return n.grad;
}

void Graph::accumulate(const Var& v, const Array2& contribution) {
  if (!requires_grad(v)) return;
  Array2& g = grad_buffer(v);
  if (!g.same_shape(contribution)) {
    throw ShapeError("accumulate: gradient " + contribution.shape_str() + " for node " + g.shape_str());
  }
  for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += contribution.data[i];
}

void Graph::backward(const Var& loss) {
  const Array2& lv = value(loss);
  if (lv.rows != 1 || lv.cols != 1) {
    throw ShapeError("backward: loss must be 1x1, got " + lv.shape_str());
  }
  if (!requires_grad(loss)) return;
  // Interior gradients are per-sweep; only leaves accumulate across calls.
  for (auto& n : nodes_) {
    if (n.backward) n.grad = Array2{};
  }
  grad_buffer(loss).data[0] += 1.0;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
    n.backward(*this, n.grad);
  }
}

void Graph::zero_grad() {
  for (auto& n : nodes_) n.grad = Array2{};
}

}  // namespace crat::ad
