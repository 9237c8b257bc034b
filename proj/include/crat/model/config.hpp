#pragma once

#include <cstddef>
#include <string>

namespace crat::model {

enum class GnnNormPlacement { after_each, before_each };

/// Architecture descriptor. Defaults reproduce the published network; the
/// widths shrink freely for gradient checks and desk-scale experiments.
struct ModelConfig {
  int history = 20;  // T_h
  int future = 30;   // T_f
  std::size_t input_dim = 3;
  std::size_t hidden = 128;
  std::size_t gnn_layers = 2;  // L_g
  std::size_t heads = 4;       // L_h
  std::size_t decoder_groups = 32;
  std::size_t modes = 6;  // k
  bool use_attention = true;
  /// after_each: conv → BN → ReLU per layer. before_each: BN → ReLU → conv,
  /// which leaves the last convolution's output un-normalized.
  GnnNormPlacement gnn_norm = GnnNormPlacement::after_each;
  double norm_eps = 1e-5;
  double bn_momentum = 0.1;

  std::size_t output_dim() const { return 2 * std::size_t(future); }
  std::size_t edge_dim() const { return 2; }

  /// Compact JSON text embedded into checkpoints.
  std::string descriptor() const;
  /// Throws DataError on malformed text.
  static ModelConfig from_descriptor(const std::string& text);
  /// Throws DataError when the widths are inconsistent.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

}  // namespace crat::model
