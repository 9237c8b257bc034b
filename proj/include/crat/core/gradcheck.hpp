#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "crat/core/params.hpp"

namespace crat {

struct GradCheckEntry {
  std::string param;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  GradCheckEntry worst;
  std::vector<GradCheckEntry> per_param;  // worst entry of each checked array
  std::size_t checked = 0;
  bool passed = true;
};

struct GradCheckOptions {
  /// Entries sampled per array; 0 checks every entry.
  std::size_t max_entries_per_param = 0;
  /// Relative error is |a − n| / max(|a|, |n|, floor); the floor keeps
  /// near-zero gradients from dividing finite-difference noise by ~0.
  double magnitude_floor = 1e-3;
  std::uint64_t seed = 0;
};

/// Compares `gradient(params)` against central differences of `loss` for
/// every trainable array. `h` must lie in [1e-7, 1e-3].
GradCheckReport finite_diff_check(const std::function<double(const ParamStore&)>& loss,
                                  const std::function<std::vector<Array2>(const ParamStore&)>& gradient,
                                  ParamStore params, double h, double tol, const GradCheckOptions& options = {});

}  // namespace crat
