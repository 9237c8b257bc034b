#include "crat/train/loss.hpp"

#include <cmath>

#include "crat/core/errors.hpp"
#include "crat/core/ops.hpp"

namespace crat::train {

double smooth_l1(const Array2& pred, const Array2& gt, double beta) {
  if (!pred.same_shape(gt)) throw ShapeError("smooth_l1: " + pred.shape_str() + " vs " + gt.shape_str());
  if (pred.empty()) throw ShapeError("smooth_l1: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double x = std::abs(pred.data[i] - gt.data[i]);
    s += x < beta ? 0.5 * x * x / beta : x - 0.5 * beta;
  }
  return s / double(pred.size());
}

WtaResult wta_loss(std::span<const Array2> modes, const Array2& gt, double beta) {
  if (modes.empty()) throw ShapeError("wta_loss: no modes");
  WtaResult r{smooth_l1(modes[0], gt, beta), 0};
  for (std::size_t m = 1; m < modes.size(); ++m) {
    const double l = smooth_l1(modes[m], gt, beta);
    if (l < r.loss) r = {l, m};
  }
  return r;
}

ad::Var wta_batch_loss(std::span<const ad::Var> modes, const Array2& targets, double beta,
                       std::span<const std::size_t> candidates, std::vector<std::size_t>* winners) {
  if (candidates.empty()) throw ShapeError("wta_batch_loss: no candidate modes");
  const std::size_t n = targets.rows;
  std::vector<ad::Var> row_losses;
  for (std::size_t c : candidates) {
    if (c >= modes.size()) throw ShapeError("wta_batch_loss: candidate mode out of range");
    row_losses.push_back(ad::row_smooth_l1(modes[c], targets, beta));
  }
  std::vector<std::size_t> best(n, 0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 1; c < candidates.size(); ++c) {
      if (row_losses[c].value()(r, 0) < row_losses[best[r]].value()(r, 0)) best[r] = c;
    }
  }
  ad::Graph& g = modes[candidates[0]].graph();
  ad::Var total;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    Array2 mask(n, 1);
    bool any = false;
    for (std::size_t r = 0; r < n; ++r) {
      if (best[r] == c) {
        mask(r, 0) = 1.0;
        any = true;
      }
    }
    if (!any) continue;
    const ad::Var part = ad::sum(ad::mul(row_losses[c], g.constant(std::move(mask))));
    total = total.valid() ? ad::add(total, part) : part;
  }
  if (winners) {
    winners->resize(n);
    for (std::size_t r = 0; r < n; ++r) (*winners)[r] = candidates[best[r]];
  }
  return ad::scale(total, 1.0 / double(n));
}

}  // namespace crat::train
