#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "crat/core/array2.hpp"
#include "crat/core/graph.hpp"

namespace crat::train {

/// Mean over all components of the smooth-L1 penalty of (pred − gt).
double smooth_l1(const Array2& pred, const Array2& gt, double beta = 1.0);

struct WtaResult {
  double loss = 0.0;
  std::size_t winner = 0;
};

/// Minimum smooth-L1 over the modes; ties go to the lowest index.
WtaResult wta_loss(std::span<const Array2> modes, const Array2& gt, double beta = 1.0);

/// Graph form over a batch. `modes[m]` holds the flattened outputs of mode m
/// for every sample (rows × 2T_f); `targets` matches that layout. Each sample
/// contributes the loss of its winning mode among `candidates`, so only the
/// winner receives gradient. Returns the batch mean (1×1); winners per sample
/// are written to `winners` when given.
ad::Var wta_batch_loss(std::span<const ad::Var> modes, const Array2& targets, double beta,
                       std::span<const std::size_t> candidates, std::vector<std::size_t>* winners = nullptr);

}  // namespace crat::train
