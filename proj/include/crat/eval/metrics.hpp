#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "crat/core/array2.hpp"
#include "crat/data/scene.hpp"

namespace crat::model {
class CratModel;
}

namespace crat::eval {

/// A mode or a ground truth is a T_f × 2 array of positions.
using Trajectory = Array2;

inline constexpr double kMissThreshold = 2.0;

/// min over modes of the mean pointwise Euclidean error.
double min_ade(std::span<const Trajectory> modes, const Trajectory& gt);
/// min over modes of the endpoint Euclidean error.
double min_fde(std::span<const Trajectory> modes, const Trajectory& gt);
/// True when no endpoint lies strictly closer than `threshold`.
bool is_miss(std::span<const Trajectory> modes, const Trajectory& gt, double threshold = kMissThreshold);
/// Fraction of sequences that miss.
double miss_rate(std::span<const std::vector<Trajectory>> preds, std::span<const Trajectory> gts,
                 double threshold = kMissThreshold);

struct MetricReport {
  std::string split;
  std::size_t k = 0;
  double min_ade = 0.0;
  double min_fde = 0.0;
  double miss_rate = 0.0;
  std::size_t n_sequences = 0;

  static std::string csv_header();  // split,k,minADE,minFDE,MR,n
  std::string csv_row() const;
  std::string to_text() const;
};

/// Scores the first k modes of every sequence. Throws DataError when empty
/// or when a sequence has fewer than k modes.
MetricReport evaluate_predictions(std::span<const std::vector<Trajectory>> preds, std::span<const Trajectory> gts,
                                  std::size_t k, const std::string& split = "");

/// Target ground truth of a scene in its target-local frame.
Trajectory target_ground_truth(const data::Scene& scene);

/// Runs the model on every scene and scores decoders {0..k−1} against the
/// target futures. Throws DataError on an empty split or missing futures.
MetricReport evaluate(const model::CratModel& model, std::span<const data::Scene> scenes, std::size_t k,
                      const std::string& split = "");

/// Target-local predictions of decoders {0..k−1} for every scene, batched.
std::vector<std::vector<Trajectory>> predict_local(const model::CratModel& model,
                                                   std::span<const data::Scene> scenes, std::size_t k);

/// Extrapolates the last observed target velocity over T_f steps.
Trajectory constant_velocity_baseline(const data::Scene& scene);

}  // namespace crat::eval
