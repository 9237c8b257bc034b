#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "crat/core/gradcheck.hpp"
#include "crat/core/ops.hpp"

namespace crat::testing {

inline Array2 random_array(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double lo = -1.0,
                           double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Array2 a(rows, cols);
  for (double& v : a.data) v = u(rng);
  return a;
}

using Builder = std::function<ad::Var(ad::Graph&, const std::vector<ad::Var>&)>;

/// Finite-difference check of an arbitrary graph builder. The scalar loss is
/// Σ out ⊙ W for a fixed random W so every output entry carries a distinct
/// upstream gradient.
inline GradCheckReport check_builder(const Builder& build, std::vector<Array2> inputs, std::uint64_t seed,
                                     double h = 1e-5, double tol = 1e-6) {
  ParamStore store;
  for (std::size_t i = 0; i < inputs.size(); ++i) store.add("in" + std::to_string(i), std::move(inputs[i]));

  Array2 weights;
  {
    ad::Graph g;
    BoundParams bound(g, store);
    std::vector<ad::Var> vars;
    for (const auto& p : store.items()) vars.push_back(bound[p.name]);
    const Array2& out = build(g, vars).value();
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    weights = random_array(out.rows, out.cols, rng);
  }

  auto run = [&](const ParamStore& ps, std::vector<Array2>* grads) {
    ad::Graph g;
    BoundParams bound(g, ps);
    std::vector<ad::Var> vars;
    for (const auto& p : ps.items()) vars.push_back(bound[p.name]);
    ad::Var loss = ad::sum(ad::mul(build(g, vars), g.constant(weights)));
    if (grads) {
      g.backward(loss);
      *grads = bound.gradients();
    }
    return loss.value().data[0];
  };
  return finite_diff_check([&](const ParamStore& ps) { return run(ps, nullptr); },
                           [&](const ParamStore& ps) {
                             std::vector<Array2> grads;
                             run(ps, &grads);
                             return grads;
                           },
                           std::move(store), h, tol);
}

}  // namespace crat::testing
