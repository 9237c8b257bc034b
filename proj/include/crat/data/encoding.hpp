#pragma once

#include <string>
#include <vector>

#include "crat/core/array2.hpp"
#include "crat/data/scene.hpp"

namespace crat::data {

/// Per-vehicle encoder input: T_h rows of (Δx, Δy, b) and the t = 0 position.
struct ActorInput {
  std::string vehicle_id;
  Array2 steps;  // T_h × 3
  Vec2 position;
};

/// Row k of `steps` describes timestep t = −T_h + 1 + k. A row carries the
/// displacement τ(t) − τ(t−1) with b = 1 when both endpoints are observed
/// inside the history window, and (0, 0, 0) otherwise, so the first row is
/// always (0, 0, 0). Scenes are expected in the target-local frame.
std::vector<ActorInput> encode_inputs(const Scene& scene);

}  // namespace crat::data
