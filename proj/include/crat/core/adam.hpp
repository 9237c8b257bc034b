#pragma once

#include <cstdint>
#include <vector>

#include "crat/core/params.hpp"

namespace crat {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Decoupled: applied to the parameter directly as p -= lr·wd·p.
  double weight_decay = 1e-2;
};

/// Adam with decoupled weight decay. Moment buffers are aligned with the
/// store order. Non-trainable entries are skipped entirely.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  /// `grads` must be in store order; an empty array means "no gradient" and
  /// leaves that parameter untouched. Throws NumericalError on a non-finite
  /// gradient, naming the parameter, before modifying anything.
  void step(ParamStore& params, const std::vector<Array2>& grads, double lr);
  void step(ParamStore& params, const std::vector<Array2>& grads) { step(params, grads, config_.lr); }

  std::uint64_t step_count() const { return step_; }
  const AdamConfig& config() const { return config_; }
  const std::vector<Array2>& first_moments() const { return m_; }
  const std::vector<Array2>& second_moments() const { return v_; }

 private:
  AdamConfig config_;
  std::uint64_t step_ = 0;
  std::vector<Array2> m_;
  std::vector<Array2> v_;
};

}  // namespace crat
