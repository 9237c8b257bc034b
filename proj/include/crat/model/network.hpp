#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "crat/core/ops.hpp"
#include "crat/core/params.hpp"
#include "crat/data/scene.hpp"
#include "crat/model/config.hpp"
#include "crat/model/layers.hpp"

namespace crat::model {

/// Parameter names. Every learnable array and running statistic of the
/// network lives in one ParamStore under these keys.
namespace names {
std::string encoder(const std::string& field);              // encoder.w_ih …
std::string gnn(std::size_t layer, const std::string& field);  // gnn.0.w_f, gnn.0.bn.gamma …
std::string attention(const std::string& field);            // attention.w_q …
std::string decoder(std::size_t mode, const std::string& field);  // decoder.3.w_dec …
inline const std::string kEncoderPrefix = "encoder.";
inline const std::string kGnnPrefix = "gnn.";
inline const std::string kAttentionPrefix = "attention.";
std::string decoder_prefix(std::size_t mode);  // "decoder.3."
}  // namespace names

/// Builds every array for `config` (all k decoders). Weights are uniform in
/// ±1/√fan_in, biases and norm shifts zero, norm scales one, running mean 0
/// and running variance 1.
ParamStore init_params(const ModelConfig& config, std::uint64_t seed);

/// Learnable scalar count per block, computed from the widths alone.
struct ParameterBreakdown {
  std::size_t encoder = 0;
  std::size_t gnn = 0;  // convolutions and their normalizations
  std::size_t attention = 0;
  std::size_t per_decoder = 0;
  std::size_t decoders = 0;
  std::size_t total() const { return encoder + gnn + attention + decoders; }
};
ParameterBreakdown parameter_breakdown(const ModelConfig& config);

/// Learnable scalars present in `params`; with include_attention false the
/// attention block is excluded.
std::size_t count_parameters(const ParamStore& params, bool include_attention = true);

/// Vehicles of several target-local scenes stacked into one row space.
struct SceneBatch {
  std::vector<std::size_t> offsets;  // scene s owns rows [offsets[s], offsets[s+1])
  std::vector<Array2> steps;         // T_h arrays of M × 3
  std::vector<data::Vec2> positions; // τ⁰ per row
  EdgeList edges;                    // block-diagonal, row indices
  std::size_t vehicles() const { return positions.size(); }
  std::size_t scenes() const { return offsets.empty() ? 0 : offsets.size() - 1; }
  std::size_t target_row(std::size_t scene) const { return offsets[scene]; }
};

/// Throws DataError unless every scene is target-local with T_h == history.
SceneBatch make_batch(std::span<const data::Scene> scenes, int history);

enum class NormMode { train, eval };

struct BackboneOutput {
  ad::Var interaction;                     // M × H, decoder input
  std::vector<AttentionRecord> attention;  // per scene; empty without attention
  std::vector<ad::BatchStats> gnn_stats;   // per GNN norm layer, train mode only
};

/// Encoder → graph convolutions → attention over a batch. In eval mode the
/// normalizations use the stored running statistics.
BackboneOutput run_backbone(const BoundParams& p, const ModelConfig& config, const SceneBatch& batch, NormMode mode);

/// Output of decoder `mode` for the given rows (rows × 2T_f).
ad::Var run_decoder(const BoundParams& p, const ModelConfig& config, const ad::Var& interaction, std::size_t mode);

/// Blends batch statistics into the stored running statistics:
/// r ← (1−momentum)·r + momentum·batch. The variance is the biased one used
/// for normalization during training, so a converged model normalizes a
/// fixed batch identically in both modes.
void update_running_stats(ParamStore& params, const ModelConfig& config, std::span<const ad::BatchStats> stats);

/// k predicted trajectories for one target, decoder 0 first.
struct PredictionSet {
  std::vector<Array2> modes;  // each T_f × 2, target-local frame
  data::RigidTransform transform;
  std::size_t size() const { return modes.size(); }
  /// Same trajectories mapped back into the raw frame.
  std::vector<Array2> raw_modes() const;
};

struct Prediction {
  PredictionSet trajectories;
  AttentionRecord attention;
};

class CratModel {
 public:
  CratModel(ModelConfig config, std::uint64_t seed);
  /// Adopts existing arrays; throws DataError when names or shapes disagree with `config`.
  CratModel(ModelConfig config, ParamStore params);

  const ModelConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  /// Number of decoders used by predict (1 after stage 1, k after stage 2).
  std::size_t active_modes() const { return active_modes_; }
  void set_active_modes(std::size_t m);

  /// Highest training stage these parameters went through (0 = untrained).
  int trained_stage() const { return trained_stage_; }
  void set_trained_stage(int stage) { trained_stage_ = stage; }

  /// Evaluation-mode forward for one scene in either frame.
  Prediction predict(const data::Scene& scene) const;
  std::vector<Prediction> predict_batch(std::span<const data::Scene> scenes) const;

  void save(const std::filesystem::path& path) const;
  static CratModel load(const std::filesystem::path& path);

 private:
  ModelConfig config_;
  ParamStore params_;
  std::size_t active_modes_;
  int trained_stage_ = 0;
};

/// Throws DataError unless `params` holds exactly the arrays of `config`.
void check_params(const ModelConfig& config, const ParamStore& params);

}  // namespace crat::model
