#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "crat/data/scene.hpp"
#include "crat/eval/metrics.hpp"
#include "crat/model/network.hpp"
#include "crat/train/trainer.hpp"

namespace crat::experiment {

enum class Strategy { euclidean, attention, causal };
std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

struct Selection {
  data::Scene scene;               // target + kept vehicles, original frame
  std::vector<std::size_t> kept;   // kept non-target indices into the input scene, in rank order
  bool tie_fallback = false;       // an exact tie at the budget boundary was broken by index
};

/// Keeps the target and the L_s others closest to it at t = 0.
Selection euclidean_select(const data::Scene& scene, std::size_t budget);

/// Keeps the L_s others with the highest head-averaged attention weight in
/// the target's row, self excluded. Throws DataError for an attention-free or
/// untrained selector.
Selection attention_select(const data::Scene& scene, std::size_t budget, const model::CratModel& selector);

/// Keeps the labelled causal vehicle first, then fills the budget by distance.
/// Throws DataError when the scene carries no causal label.
Selection causal_select(const data::Scene& scene, std::size_t budget);

/// Orders `candidates` (indices ≥ 1) by descending score, ties by lower index,
/// and keeps the first `budget`. Reports whether a boundary tie decided the set.
Selection select_by_score(const data::Scene& scene, const std::vector<double>& score, std::size_t budget);

struct ExperimentConfig {
  std::vector<std::size_t> budgets{1, 3, 5, 7, 9};
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::vector<Strategy> strategies{Strategy::euclidean, Strategy::attention};
  model::ModelConfig predictor;      // attention-free by default
  train::TrainConfig predictor_training;
  std::size_t k = 6;                 // metrics use decoders {0..k−1}

  ExperimentConfig() { predictor.use_attention = false; }
};

struct ExperimentRow {
  std::string strategy;  // "reference" for the full-scene run
  std::size_t budget = 0;
  std::uint64_t seed = 0;
  eval::MetricReport metrics;
  double delta_min_ade = 0.0;
  double delta_min_fde = 0.0;
  double delta_miss_rate = 0.0;
  double causal_hit_rate = -1.0;  // fraction of labelled val scenes keeping the causal vehicle; −1 if unlabelled
  std::size_t tie_fallbacks = 0;  // val scenes whose selection needed the index tie rule
};

struct ExperimentTable {
  std::vector<ExperimentRow> rows;

  static std::string csv_header();
  /// Header comment naming the independent predictor, then one row per cell.
  std::string to_csv() const;
  /// Mean over seeds of a strategy's minADE delta at one budget.
  double mean_delta_ade(const std::string& strategy, std::size_t budget) const;
  double mean_min_ade(const std::string& strategy, std::size_t budget) const;
  std::string bar_chart_svg() const;
};

using ProgressFn = std::function<void(const std::string&)>;

/// Reduces both splits with each strategy, retrains the independent predictor
/// from scratch per (strategy, L_s, seed), and scores it against a full-scene
/// reference run with the same seed.
ExperimentTable run_experiment(const std::vector<data::Scene>& train_set, const std::vector<data::Scene>& val_set,
                               const model::CratModel& selector, const ExperimentConfig& config,
                               const ProgressFn& progress = {});

/// Fraction of labelled scenes whose reduced version keeps the causal vehicle.
double causal_hit_rate(const std::vector<data::Scene>& scenes, const std::vector<Selection>& selections);

}  // namespace crat::experiment
