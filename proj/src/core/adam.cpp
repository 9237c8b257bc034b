#include "crat/core/adam.hpp"

#include <cmath>

#include "crat/core/errors.hpp"

namespace crat {

void Adam::step(ParamStore& params, const std::vector<Array2>& grads, double lr) {
  auto& items = params.items();
  if (grads.size() != items.size()) {
    throw ShapeError("Adam::step: " + std::to_string(grads.size()) + " gradients for " +
                     std::to_string(items.size()) + " parameters");
  }
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!items[i].trainable || grads[i].empty()) continue;
    if (!grads[i].same_shape(items[i].value)) {
      throw ShapeError("Adam::step: gradient " + grads[i].shape_str() + " for " + items[i].name + " " +
                       items[i].value.shape_str());
    }
    if (!all_finite(grads[i])) throw NumericalError("non-finite gradient for parameter " + items[i].name);
  }
  if (m_.size() != items.size()) {
    m_.assign(items.size(), Array2{});
    v_.assign(items.size(), Array2{});
  }

  ++step_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double bias1 = 1.0 - std::pow(b1, double(step_));
  const double bias2 = 1.0 - std::pow(b2, double(step_));
  for (std::size_t i = 0; i < items.size(); ++i) {
    Param& p = items[i];
    if (!p.trainable || grads[i].empty()) continue;
    if (m_[i].empty()) {
      m_[i] = Array2(p.value.rows, p.value.cols);
      v_[i] = Array2(p.value.rows, p.value.cols);
    }
    const Array2& g = grads[i];
    for (std::size_t j = 0; j < g.size(); ++j) {
      double& m = m_[i].data[j];
      double& v = v_[i].data[j];
      m = b1 * m + (1.0 - b1) * g.data[j];
      v = b2 * v + (1.0 - b2) * g.data[j] * g.data[j];
      const double update = (m / bias1) / (std::sqrt(v / bias2) + config_.eps);
      double& w = p.value.data[j];
      w -= lr * config_.weight_decay * w;
      w -= lr * update;
    }
  }
}

}  // namespace crat
