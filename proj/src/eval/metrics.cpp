#include "crat/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "crat/core/errors.hpp"
#include "crat/model/network.hpp"

namespace crat::eval {

namespace {

void check_shapes(std::span<const Trajectory> modes, const Trajectory& gt) {
  if (modes.empty()) throw ShapeError("metrics: no modes");
  if (gt.cols != 2 || gt.rows == 0) throw ShapeError("metrics: ground truth is " + gt.shape_str());
  for (const auto& m : modes) {
    if (!m.same_shape(gt)) throw ShapeError("metrics: mode " + m.shape_str() + " vs ground truth " + gt.shape_str());
  }
}

double point_dist(const Trajectory& a, const Trajectory& b, std::size_t t) {
  return std::hypot(a(t, 0) - b(t, 0), a(t, 1) - b(t, 1));
}

double endpoint_dist(std::span<const Trajectory> modes, const Trajectory& gt) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& m : modes) best = std::min(best, point_dist(m, gt, gt.rows - 1));
  return best;
}

}  // namespace

double min_ade(std::span<const Trajectory> modes, const Trajectory& gt) {
  check_shapes(modes, gt);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& m : modes) {
    double s = 0.0;
    for (std::size_t t = 0; t < gt.rows; ++t) s += point_dist(m, gt, t);
    best = std::min(best, s / double(gt.rows));
  }
  return best;
}

double min_fde(std::span<const Trajectory> modes, const Trajectory& gt) {
  check_shapes(modes, gt);
  return endpoint_dist(modes, gt);
}

bool is_miss(std::span<const Trajectory> modes, const Trajectory& gt, double threshold) {
  check_shapes(modes, gt);
  return !(endpoint_dist(modes, gt) < threshold);
}

double miss_rate(std::span<const std::vector<Trajectory>> preds, std::span<const Trajectory> gts, double threshold) {
  if (preds.empty() || preds.size() != gts.size()) {
    throw DataError("miss_rate: " + std::to_string(preds.size()) + " predictions for " + std::to_string(gts.size()) +
                    " sequences");
  }
  std::size_t misses = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) misses += is_miss(preds[i], gts[i], threshold) ? 1 : 0;
  return double(misses) / double(preds.size());
}

std::string MetricReport::csv_header() { return "split,k,minADE,minFDE,MR,n"; }

std::string MetricReport::csv_row() const {
  std::ostringstream s;
  s.precision(17);
  s << split << ',' << k << ',' << min_ade << ',' << min_fde << ',' << miss_rate << ',' << n_sequences;
  return s.str();
}

std::string MetricReport::to_text() const {
  std::ostringstream s;
  s.precision(4);
  s << std::fixed << (split.empty() ? "" : split + " ") << "k=" << k << " minADE=" << min_ade
    << " minFDE=" << min_fde << " MR=" << miss_rate << " n=" << n_sequences;
  return s.str();
}

MetricReport evaluate_predictions(std::span<const std::vector<Trajectory>> preds, std::span<const Trajectory> gts,
                                  std::size_t k, const std::string& split) {
  if (preds.empty()) throw DataError("evaluate: empty split");
  if (preds.size() != gts.size()) throw DataError("evaluate: prediction and ground-truth counts differ");
  if (k == 0) throw DataError("evaluate: k must be positive");
  MetricReport r;
  r.split = split;
  r.k = k;
  r.n_sequences = preds.size();
  std::size_t misses = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].size() < k) {
      throw DataError("evaluate: sequence " + std::to_string(i) + " has " + std::to_string(preds[i].size()) +
                      " modes, k=" + std::to_string(k));
    }
    const std::span<const Trajectory> modes(preds[i].data(), k);
    r.min_ade += min_ade(modes, gts[i]);
    r.min_fde += min_fde(modes, gts[i]);
    misses += is_miss(modes, gts[i]) ? 1 : 0;
  }
  const double n = double(preds.size());
  r.min_ade /= n;
  r.min_fde /= n;
  r.miss_rate = double(misses) / n;
  return r;
}

Trajectory target_ground_truth(const data::Scene& scene) {
  if (!scene.has_full_future()) throw DataError("scene '" + scene.name + "' has no ground-truth future");
  const data::Scene local = data::to_target_frame(scene);
  const auto fut = local.target_future();
  Trajectory gt(fut.size(), 2);
  for (std::size_t t = 0; t < fut.size(); ++t) {
    gt(t, 0) = fut[t].x;
    gt(t, 1) = fut[t].y;
  }
  return gt;
}

std::vector<std::vector<Trajectory>> predict_local(const model::CratModel& model, std::span<const data::Scene> scenes,
                                                   std::size_t k) {
  if (k > model.active_modes()) {
    throw DataError("model has " + std::to_string(model.active_modes()) + " trained modes, k=" + std::to_string(k));
  }
  constexpr std::size_t chunk = 64;
  std::vector<std::vector<Trajectory>> out;
  out.reserve(scenes.size());
  for (std::size_t lo = 0; lo < scenes.size(); lo += chunk) {
    const std::size_t hi = std::min(scenes.size(), lo + chunk);
    for (auto& p : model.predict_batch(scenes.subspan(lo, hi - lo))) {
      p.trajectories.modes.resize(k);
      out.push_back(std::move(p.trajectories.modes));
    }
  }
  return out;
}

MetricReport evaluate(const model::CratModel& model, std::span<const data::Scene> scenes, std::size_t k,
                      const std::string& split) {
  if (scenes.empty()) throw DataError("evaluate: empty split");
  std::vector<Trajectory> gts;
  gts.reserve(scenes.size());
  for (const auto& s : scenes) gts.push_back(target_ground_truth(s));
  const auto preds = predict_local(model, scenes, k);
  return evaluate_predictions(preds, gts, k, split);
}

Trajectory constant_velocity_baseline(const data::Scene& scene) {
  const data::Scene local = data::to_target_frame(scene);
  const auto p0 = local.target().at(0), p1 = local.target().at(-1);
  if (!p0 || !p1) throw DataError("constant_velocity_baseline: target lacks t=-1 or t=0");
  const data::Vec2 v = *p0 - *p1;
  Trajectory out(std::size_t(local.future), 2);
  for (std::size_t t = 0; t < out.rows; ++t) {
    out(t, 0) = p0->x + double(t + 1) * v.x;
    out(t, 1) = p0->y + double(t + 1) * v.y;
  }
  return out;
}

}  // namespace crat::eval
