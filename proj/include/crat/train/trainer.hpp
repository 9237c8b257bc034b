#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "crat/core/adam.hpp"
#include "crat/data/scene.hpp"
#include "crat/model/network.hpp"

namespace crat::train {

/// Epochs are numbered from 1. The learning rate is `lr` up to and including
/// `decay_epoch`, `decayed_lr` afterwards.
struct StageSchedule {
  int epochs = 36;
  int decay_epoch = 32;
  double lr = 1e-3;
  double decayed_lr = 1e-4;
  double lr_at(int epoch) const { return epoch <= decay_epoch ? lr : decayed_lr; }
};

enum class DecoderInit { copy_with_noise, fresh };

struct TrainConfig {
  StageSchedule stage1;
  StageSchedule stage2;
  bool run_stage2 = true;
  std::size_t batch_size = 32;
  AdamConfig adam;  // lr fields are overridden by the schedule
  double beta = 1.0;  // smooth-L1 transition point, metres
  std::uint64_t seed = 0;
  bool shuffle = true;
  /// Whether the frozen decoder 0 takes part in the stage-2 minimum.
  bool wta_includes_decoder0 = true;
  DecoderInit decoder_init = DecoderInit::copy_with_noise;
  double init_noise = 1e-2;
  /// Per-epoch checkpoints `stage{1|2}_epoch{N}.ckpt`; empty disables them.
  std::filesystem::path checkpoint_dir;

  /// Throws std::invalid_argument on non-positive values or a decay epoch
  /// outside the stage.
  void validate() const;
};

/// Trainable flags per stage. Stage 1 trains everything except decoders
/// 1..k−1, which do not exist yet; stage 2 trains only those decoders.
enum class Stage { one = 1, two = 2 };
void apply_freeze_mask(ParamStore& params, const model::ModelConfig& config, Stage stage);

struct EpochLog {
  int stage = 1;
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  std::optional<double> val_min_ade_1;
  std::optional<double> val_min_ade_k;  // stage 2
  std::vector<std::size_t> train_winners;  // stage 2 histogram over k modes
  std::vector<std::size_t> val_winners;

  std::string to_json() const;
};

struct TrainResult {
  model::CratModel model;
  std::vector<EpochLog> log;
};

/// Called after every epoch (e.g. to stream the log).
using EpochCallback = std::function<void(const EpochLog&, const model::CratModel&)>;

/// Runs stage 1 and, unless disabled, stage 2. Scenes may be in either frame.
/// Throws NumericalError naming stage, epoch and batch on a non-finite loss.
TrainResult train(std::span<const data::Scene> train_set, std::span<const data::Scene> val_set,
                  const model::ModelConfig& model_config, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

/// Stage 1 on an existing model: all of the backbone and decoder 0.
std::vector<EpochLog> train_stage1(model::CratModel& model, std::span<const data::Scene> train_set,
                                   std::span<const data::Scene> val_set, const TrainConfig& config,
                                   const EpochCallback& on_epoch = {});
/// Stage 2: initializes decoders 1..k−1 and trains them by WTA behind the
/// frozen, evaluation-mode backbone.
std::vector<EpochLog> train_stage2(model::CratModel& model, std::span<const data::Scene> train_set,
                                   std::span<const data::Scene> val_set, const TrainConfig& config,
                                   const EpochCallback& on_epoch = {});

/// Index of the winning mode per scene (lowest index on ties), using the
/// model's active modes.
std::vector<std::size_t> wta_winners(const model::CratModel& model, std::span<const data::Scene> scenes,
                                     double beta = 1.0);

}  // namespace crat::train
