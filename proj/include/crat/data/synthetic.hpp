#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crat/data/scene.hpp"

namespace crat::data {

enum class ScenarioKind { constant_velocity, leader_follower, intersection, bimodal_turn };

std::string to_string(ScenarioKind k);
ScenarioKind scenario_from_string(const std::string& s);

/// Knobs of the desk-scale scene generator. Distances in meters, speeds in m/s.
struct SyntheticConfig {
  int history = 20;
  int future = 30;
  double min_speed = 5.0;
  double max_speed = 15.0;
  double crowd_radius = 40.0;
  int crowd_min_vehicles = 3;
  int crowd_max_vehicles = 8;
  /// Probability that a non-target vehicle enters the scene mid-history.
  double late_entry_prob = 0.3;
  /// Probability of an extra vehicle that leaves before t = 0 (dropped on load).
  double departed_vehicle_prob = 0.2;

  // leader–follower braking
  double min_headway = 18.0;
  double max_headway = 30.0;
  double min_decel = 1.5;
  double max_decel = 5.0;
  double reaction_time = 1.0;
  double reaction_jitter = 0.1;
  int min_distractors = 4;
  int max_distractors = 7;

  // bimodal turn
  double turn_speed = 8.0;
  double turn_radius = 12.0;
  double turn_entry = 5.0;  // straight distance after t = 0 before the arc
  /// Zero gives identical target histories across all bimodal scenes.
  double turn_speed_jitter = 0.0;
  /// Probability that a scene turns left (+y in the target frame).
  double left_turn_prob = 0.5;
  /// Constant-velocity bystanders around the turn; they carry no turn cue.
  int min_bystanders = 2;
  int max_bystanders = 5;
};

/// Generates `n` scenes in the raw frame; scene i depends only on (seed, i).
/// The target is always track 0; other tracks appear in shuffled order.
/// Leader–follower and intersection scenes carry the interacting vehicle in
/// `causal_id`. Bimodal-turn scenes turn left with probability `left_turn_prob`.
std::vector<Scene> generate_synthetic(ScenarioKind kind, std::size_t n, std::uint64_t seed,
                                      const SyntheticConfig& config = {});
Scene generate_scene(ScenarioKind kind, std::uint64_t seed, std::size_t index, const SyntheticConfig& config = {});

}  // namespace crat::data
