#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "crat/core/array2.hpp"
#include "crat/core/graph.hpp"

namespace crat {

/// One named array owned by a model. Buffers (running statistics) are stored
/// alongside learnable values but are never optimized or counted.
struct Param {
  std::string name;
  Array2 value;
  bool learnable = true;
  bool trainable = true;
};

/// Ordered collection of named arrays. Insertion order is the canonical order
/// for checkpoints, gradients and optimizer state.
class ParamStore {
 public:
  Param& add(std::string name, Array2 value, bool learnable = true);

  bool contains(const std::string& name) const { return index_.contains(name); }
  std::size_t index_of(const std::string& name) const;
  Param& at(const std::string& name) { return items_[index_of(name)]; }
  const Param& at(const std::string& name) const { return items_[index_of(name)]; }
  Array2& value(const std::string& name) { return at(name).value; }
  const Array2& value(const std::string& name) const { return at(name).value; }

  std::vector<Param>& items() { return items_; }
  const std::vector<Param>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }

  /// Learnable scalar count, optionally restricted to names with a prefix.
  std::size_t learnable_count(const std::string& prefix = "") const;

  /// Marks every learnable array trainable iff `pred(name)` holds.
  template <class Pred>
  void set_trainable(Pred pred) {
    for (auto& p : items_) p.trainable = p.learnable && pred(p.name);
  }

  friend bool operator==(const ParamStore& a, const ParamStore& b) { return a.items_ == b.items_; }

 private:
  std::vector<Param> items_;
  std::map<std::string, std::size_t> index_;
};

inline bool operator==(const Param& a, const Param& b) {
  return a.name == b.name && a.value == b.value && a.learnable == b.learnable && a.trainable == b.trainable;
}

/// Parameter values bound as leaves of one graph. Trainable arrays become
/// gradient-carrying variables; everything else is bound as a constant.
class BoundParams {
 public:
  /// With `track_grad` false every array is bound as a constant (inference).
  BoundParams(ad::Graph& graph, const ParamStore& store, bool track_grad = true);

  const ad::Var& operator[](const std::string& name) const;
  ad::Graph& graph() const { return *graph_; }

  /// Gradients in store order; empty arrays for arrays bound as constants.
  std::vector<Array2> gradients() const;

 private:
  ad::Graph* graph_;
  const ParamStore* store_;
  std::vector<ad::Var> vars_;
};

}  // namespace crat
