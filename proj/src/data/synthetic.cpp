#include "crat/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>

#include "crat/core/errors.hpp"

namespace crat::data {
namespace {

constexpr double kDt = 0.1;

std::uint64_t mix(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Canonical-frame vehicle: position as a function of time in seconds
/// (t = 0 at the last observed frame) plus the observed frame range.
struct Actor {
  std::function<Vec2(double)> pos;
  int first_step;
  int last_step;
  bool target = false;
  bool causal = false;
};

/// Distance travelled since t = 0 for constant speed v0 until `onset`, then
/// constant deceleration to a standstill.
double braking_travel(double t, double v0, double onset, double decel) {
  auto s = [&](double tau) {
    if (tau <= onset) return v0 * (tau - onset);
    const double stop = v0 / decel;
    const double dt = std::min(tau - onset, stop);
    return v0 * dt - 0.5 * decel * dt * dt;
  };
  return s(t) - s(0.0);
}

Vec2 heading(double angle) { return {std::cos(angle), std::sin(angle)}; }

class Builder {
 public:
  Builder(ScenarioKind kind, std::uint64_t seed, std::size_t index, const SyntheticConfig& cfg)
      : kind_(kind), index_(index), cfg_(cfg), rng_(mix(seed, index)) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool coin(double p) { return std::bernoulli_distribution(p)(rng_); }

  int first() const { return -cfg_.history + 1; }

  int entry_step() {
    return coin(cfg_.late_entry_prob) ? uniform_int(first() + 1, 0) : first();
  }

  Scene finish(std::vector<Actor> actors) {
    std::vector<std::size_t> order;
    for (std::size_t i = 1; i < actors.size(); ++i) order.push_back(i);
    std::shuffle(order.begin(), order.end(), rng_);
    // CSV readers order tracks by first appearance; match that here.
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return actors[a].first_step < actors[b].first_step; });
    order.insert(order.begin(), 0);

    const RigidTransform pose{{uniform(-500.0, 500.0), uniform(-500.0, 500.0)},
                              uniform(-std::numbers::pi, std::numbers::pi)};
    Scene scene;
    scene.name = to_string(kind_) + "_" + std::to_string(index_);
    scene.history = cfg_.history;
    scene.future = cfg_.future;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
      const Actor& a = actors[order[rank]];
      Track tr;
      tr.id = a.target ? "agent" : "v" + std::to_string(rank);
      tr.role = a.target ? Role::target : Role::other;
      for (int t = a.first_step; t <= a.last_step; ++t) tr.obs.push_back({t, pose.invert(a.pos(t * kDt))});
      if (a.causal) scene.causal_id = tr.id;
      scene.tracks.push_back(std::move(tr));
    }
    return scene;
  }

  Actor constant_velocity(Vec2 p0, Vec2 velocity) {
    return Actor{[=](double t) { return p0 + t * velocity; }, entry_step(), cfg_.future};
  }

  /// Vehicle seen only before t = 0; removed by the observability rule on load.
  void maybe_departed(std::vector<Actor>& actors, Vec2 around) {
    if (!coin(cfg_.departed_vehicle_prob)) return;
    const Vec2 p = around + Vec2{uniform(-20.0, 20.0), uniform(-20.0, 20.0)};
    const Vec2 v = uniform(cfg_.min_speed, cfg_.max_speed) * heading(uniform(-std::numbers::pi, std::numbers::pi));
    actors.push_back(Actor{[=](double t) { return p + t * v; }, first(), uniform_int(first(), -1)});
  }

  Scene constant_velocity_crowd() {
    std::vector<Actor> actors;
    const double v = uniform(cfg_.min_speed, cfg_.max_speed);
    actors.push_back(Actor{[=](double t) { return Vec2{v * t, 0.0}; }, first(), cfg_.future, true});
    const int others = uniform_int(cfg_.crowd_min_vehicles, cfg_.crowd_max_vehicles) - 1;
    for (int i = 0; i < others; ++i) {
      const double r = cfg_.crowd_radius * std::sqrt(uniform(0.01, 1.0));
      const Vec2 p0 = r * heading(uniform(-std::numbers::pi, std::numbers::pi));
      const Vec2 vel = uniform(cfg_.min_speed, cfg_.max_speed) * heading(uniform(-std::numbers::pi, std::numbers::pi));
      actors.push_back(constant_velocity(p0, vel));
    }
    maybe_departed(actors, {0.0, 0.0});
    return finish(std::move(actors));
  }

  /// Same-lane distractors keep a gap so lanes stay collision-free.
  std::vector<Actor> lane_distractors(double min_x, double max_x, double v_lo, double v_hi) {
    std::vector<Actor> out;
    std::vector<std::pair<double, double>> placed;  // (lane y, x)
    const double lanes[] = {-7.0, -3.5, 3.5, 7.0};
    const int count = uniform_int(cfg_.min_distractors, cfg_.max_distractors);
    for (int tries = 0; int(out.size()) < count && tries < 200; ++tries) {
      const bool behind = coin(0.15);
      const double y = behind ? 0.0 : lanes[uniform_int(0, 3)];
      const double x = behind ? uniform(-20.0, -8.0) : uniform(min_x, max_x);
      const bool clash = std::any_of(placed.begin(), placed.end(),
                                     [&](const auto& p) { return p.first == y && std::abs(p.second - x) < 8.0; });
      if (clash) continue;
      placed.emplace_back(y, x);
      const double speed = uniform(v_lo, v_hi);
      out.push_back(constant_velocity({x, y}, {speed, 0.0}));
    }
    return out;
  }

  Scene leader_follower() {
    std::vector<Actor> actors;
    const double v_follow = uniform(8.0, 14.0);
    const double v_lead = v_follow + uniform(-1.0, 1.0);
    const double headway = uniform(cfg_.min_headway, cfg_.max_headway);
    const double decel = uniform(cfg_.min_decel, cfg_.max_decel);
    const double lead_onset = uniform(-1.0, -0.3);
    const double follow_onset =
        lead_onset + cfg_.reaction_time + uniform(-cfg_.reaction_jitter, cfg_.reaction_jitter);
    actors.push_back(Actor{[=](double t) { return Vec2{braking_travel(t, v_follow, follow_onset, decel), 0.0}; },
                           first(), cfg_.future, true});
    actors.push_back(
        Actor{[=](double t) { return Vec2{headway + braking_travel(t, v_lead, lead_onset, decel), 0.0}; }, first(),
              cfg_.future, false, true});
    for (auto& a : lane_distractors(-15.0, 15.0, 8.0, 14.0)) actors.push_back(std::move(a));
    maybe_departed(actors, {0.0, 0.0});
    return finish(std::move(actors));
  }

  Scene intersection() {
    std::vector<Actor> actors;
    const double v = uniform(8.0, 12.0);
    const double stop_line = uniform(15.0, 30.0);
    const double cross_speed = uniform(8.0, 12.0);
    const double cross_arrival = uniform(1.0, 3.5);
    const double side = coin(0.5) ? 1.0 : -1.0;
    const double target_arrival = stop_line / v;
    const bool conflict = std::abs(cross_arrival - target_arrival) < 1.5;
    const double onset = 0.2;
    // Yielding target stops 5 m before the crossing road.
    const double room = std::max(stop_line - 5.0 - v * onset, 1.0);
    const double decel = conflict ? v * v / (2.0 * room) : 0.0;
    if (conflict) {
      actors.push_back(Actor{[=](double t) { return Vec2{braking_travel(t, v, onset, decel), 0.0}; }, first(),
                             cfg_.future, true});
    } else {
      actors.push_back(Actor{[=](double t) { return Vec2{v * t, 0.0}; }, first(), cfg_.future, true});
    }
    // Crossing vehicle on the perpendicular road x = stop_line + 5.
    const Vec2 cross_at_arrival{stop_line + 5.0, 0.0};
    const Vec2 cross_vel{0.0, -side * cross_speed};
    const Vec2 cross_p0 = cross_at_arrival - cross_arrival * cross_vel;
    actors.push_back(Actor{[=](double t) { return cross_p0 + t * cross_vel; }, first(), cfg_.future, false, true});
    for (auto& a : lane_distractors(-15.0, 10.0, 8.0, 12.0)) actors.push_back(std::move(a));
    maybe_departed(actors, {0.0, 0.0});
    return finish(std::move(actors));
  }

  Scene bimodal_turn() {
    const double speed = cfg_.turn_speed + cfg_.turn_speed_jitter * uniform(-1.0, 1.0);
    const double side = coin(cfg_.left_turn_prob) ? 1.0 : -1.0;
    const double radius = cfg_.turn_radius;
    const double entry = cfg_.turn_entry;
    const double arc = 0.5 * std::numbers::pi * radius;
    auto path = [=](double t) {
      const double s = speed * t;
      if (s <= entry) return Vec2{s, 0.0};
      if (s <= entry + arc) {
        const double phi = (s - entry) / radius;
        return Vec2{entry + radius * std::sin(phi), side * radius * (1.0 - std::cos(phi))};
      }
      return Vec2{entry + radius, side * (radius + (s - entry - arc))};
    };
    std::vector<Actor> actors;
    actors.push_back(Actor{path, first(), cfg_.future, true});
    const int bystanders = uniform_int(cfg_.min_bystanders, cfg_.max_bystanders);
    for (int i = 0; i < bystanders; ++i) {
      const double r = cfg_.crowd_radius * std::sqrt(uniform(0.05, 1.0));
      const Vec2 p0 = r * heading(uniform(-std::numbers::pi, std::numbers::pi));
      const Vec2 vel = uniform(cfg_.min_speed, cfg_.max_speed) * heading(uniform(-std::numbers::pi, std::numbers::pi));
      actors.push_back(constant_velocity(p0, vel));
    }
    return finish(std::move(actors));
  }

 private:
  ScenarioKind kind_;
  std::size_t index_;
  SyntheticConfig cfg_;
  std::mt19937_64 rng_;
};

}  // namespace

std::string to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::constant_velocity: return "constant-velocity";
    case ScenarioKind::leader_follower: return "leader-follower";
    case ScenarioKind::intersection: return "intersection";
    case ScenarioKind::bimodal_turn: return "bimodal-turn";
  }
  return "?";
}

ScenarioKind scenario_from_string(const std::string& s) {
  for (auto k : {ScenarioKind::constant_velocity, ScenarioKind::leader_follower, ScenarioKind::intersection,
                 ScenarioKind::bimodal_turn})
    if (to_string(k) == s) return k;
  throw DataError("unknown scenario '" + s + "'");
}

Scene generate_scene(ScenarioKind kind, std::uint64_t seed, std::size_t index, const SyntheticConfig& config) {
  Builder b(kind, seed, index, config);
  switch (kind) {
    case ScenarioKind::constant_velocity: return b.constant_velocity_crowd();
    case ScenarioKind::leader_follower: return b.leader_follower();
    case ScenarioKind::intersection: return b.intersection();
    case ScenarioKind::bimodal_turn: return b.bimodal_turn();
  }
  throw DataError("unknown scenario kind");
}

std::vector<Scene> generate_synthetic(ScenarioKind kind, std::size_t n, std::uint64_t seed,
                                      const SyntheticConfig& config) {
  std::vector<Scene> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Scene s = generate_scene(kind, seed, i, config);
    // Departed vehicles never reach t = 0; drop them like the CSV loader does.
    std::erase_if(s.tracks, [](const Track& tr) { return !tr.observed(0); });
    validate(s);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace crat::data
