#include "crat/core/params.hpp"

#include "crat/core/errors.hpp"

namespace crat {

Param& ParamStore::add(std::string name, Array2 value, bool learnable) {
  if (index_.contains(name)) throw DataError("duplicate parameter name: " + name);
  index_.emplace(name, items_.size());
  items_.push_back(Param{std::move(name), std::move(value), learnable, learnable});
  return items_.back();
}

std::size_t ParamStore::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw DataError("unknown parameter: " + name);
  return it->second;
}

std::size_t ParamStore::learnable_count(const std::string& prefix) const {
  std::size_t n = 0;
  for (const auto& p : items_) {
    if (p.learnable && p.name.starts_with(prefix)) n += p.value.size();
  }
  return n;
}

BoundParams::BoundParams(ad::Graph& graph, const ParamStore& store, bool track_grad)
    : graph_(&graph), store_(&store) {
  vars_.reserve(store.size());
  for (const auto& p : store.items()) {
    vars_.push_back(track_grad && p.trainable ? graph.variable(p.value) : graph.constant(p.value));
  }
}

const ad::Var& BoundParams::operator[](const std::string& name) const { return vars_[store_->index_of(name)]; }

std::vector<Array2> BoundParams::gradients() const {
  std::vector<Array2> out(vars_.size());
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    if (vars_[i].requires_grad()) out[i] = vars_[i].grad();
  }
  return out;
}

}  // namespace crat
