#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace crat::data {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Vec2, Vec2) = default;
  double norm() const { return std::hypot(x, y); }
};

/// Position at integer timestep t (10 Hz), t = 0 being the last observed frame.
struct Observation {
  int t = 0;
  Vec2 pos;
  friend bool operator==(const Observation&, const Observation&) = default;
};

enum class Role { target, other };

struct Track {
  std::string id;
  Role role = Role::other;
  std::vector<Observation> obs;  // strictly increasing t

  std::optional<Vec2> at(int t) const;
  bool observed(int t) const { return at(t).has_value(); }
  friend bool operator==(const Track&, const Track&) = default;
};

/// p ↦ R(−angle)·(p − origin). The inverse maps local coordinates back to raw.
struct RigidTransform {
  Vec2 origin;
  double angle = 0.0;

  Vec2 apply(Vec2 p) const;
  Vec2 invert(Vec2 q) const;
  friend bool operator==(const RigidTransform&, const RigidTransform&) = default;
};

enum class Frame { raw, target_local };

/// All tracks of one sequence. The target track is always tracks[0].
struct Scene {
  std::string name;
  std::vector<Track> tracks;
  int history = 20;  // T_h: observed steps t ∈ [−T_h+1, 0]
  int future = 30;   // T_f: predicted steps t ∈ [1, T_f]
  Frame frame = Frame::raw;
  RigidTransform transform;          // raw → target-local, identity while raw
  std::optional<std::string> causal_id;  // interacting vehicle, synthetic scenes only

  const Track& target() const { return tracks.front(); }
  std::size_t vehicle_count() const { return tracks.size(); }
  int first_step() const { return -history + 1; }
  bool has_full_future() const;
  /// Target ground-truth future as T_f×2 rows (x, y); requires has_full_future().
  std::vector<Vec2> target_future() const;
  std::optional<std::size_t> index_of(const std::string& vehicle_id) const;

  friend bool operator==(const Scene&, const Scene&) = default;
};

/// Throws DataError unless the scene satisfies the structural invariants
/// (single target at index 0, target history complete, every track observed
/// at t = 0, strictly increasing timesteps).
void validate(const Scene& scene);

/// Translates by −τ_target(0) and rotates so τ_target(0) − τ_target(−1) lies on
/// +x. A stationary target keeps angle 0. Already-local scenes are returned as-is.
Scene to_target_frame(const Scene& scene);
/// Applies the stored inverse transform.
Scene to_raw_frame(const Scene& scene);

/// Copy containing only the listed track indices (in the given order); the
/// target index 0 must be first.
Scene subset(const Scene& scene, const std::vector<std::size_t>& keep);

/// Drops every observation with t > 0.
Scene without_future(const Scene& scene);

}  // namespace crat::data
