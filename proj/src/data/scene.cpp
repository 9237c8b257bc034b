#include "crat/data/scene.hpp"

#include <algorithm>

#include "crat/core/errors.hpp"

namespace crat::data {

std::optional<Vec2> Track::at(int t) const {
  auto it = std::lower_bound(obs.begin(), obs.end(), t, [](const Observation& o, int v) { return o.t < v; });
  if (it == obs.end() || it->t != t) return std::nullopt;
  return it->pos;
}

Vec2 RigidTransform::apply(Vec2 p) const {
  const double c = std::cos(angle), s = std::sin(angle);
  const Vec2 d = p - origin;
  return {c * d.x + s * d.y, -s * d.x + c * d.y};
}

Vec2 RigidTransform::invert(Vec2 q) const {
  const double c = std::cos(angle), s = std::sin(angle);
  return Vec2{c * q.x - s * q.y, s * q.x + c * q.y} + origin;
}

bool Scene::has_full_future() const {
  const Track& t = target();
  for (int step = 1; step <= future; ++step)
    if (!t.observed(step)) return false;
  return true;
}

std::vector<Vec2> Scene::target_future() const {
  std::vector<Vec2> out;
  out.reserve(std::size_t(future));
  for (int step = 1; step <= future; ++step) {
    auto p = target().at(step);
    if (!p) throw DataError("scene " + name + ": target future missing at t=" + std::to_string(step));
    out.push_back(*p);
  }
  return out;
}

std::optional<std::size_t> Scene::index_of(const std::string& vehicle_id) const {
  for (std::size_t i = 0; i < tracks.size(); ++i)
    if (tracks[i].id == vehicle_id) return i;
  return std::nullopt;
}

void validate(const Scene& scene) {
  auto fail = [&](const std::string& why) { throw DataError("scene " + scene.name + ": " + why); };
  if (scene.tracks.empty()) fail("no tracks");
  if (scene.tracks.front().role != Role::target) fail("target track is not first");
  for (std::size_t i = 1; i < scene.tracks.size(); ++i)
    if (scene.tracks[i].role == Role::target) fail("more than one target track");
  for (int t = scene.first_step(); t <= 0; ++t)
    if (!scene.target().observed(t)) fail("target history missing t=" + std::to_string(t));
  for (const Track& tr : scene.tracks) {
    if (!tr.observed(0)) fail("track " + tr.id + " not observed at t=0");
    for (std::size_t k = 1; k < tr.obs.size(); ++k)
      if (tr.obs[k].t <= tr.obs[k - 1].t) fail("track " + tr.id + " timesteps not increasing");
  }
}

namespace {

Scene map_positions(const Scene& scene, auto&& f) {
  Scene out = scene;
  for (Track& tr : out.tracks)
    for (Observation& o : tr.obs) o.pos = f(o.pos);
  return out;
}

}  // namespace

Scene to_target_frame(const Scene& scene) {
  if (scene.frame == Frame::target_local) return scene;
  const Track& target = scene.target();
  const auto p0 = target.at(0);
  if (!p0) throw DataError("scene " + scene.name + ": target not observed at t=0");
  RigidTransform tf{*p0, 0.0};
  if (const auto prev = target.at(-1)) {
    const Vec2 heading = *p0 - *prev;
    if (heading.x != 0.0 || heading.y != 0.0) tf.angle = std::atan2(heading.y, heading.x);
  }
  Scene out = map_positions(scene, [&](Vec2 p) { return tf.apply(p); });
  out.frame = Frame::target_local;
  out.transform = tf;
  return out;
}

Scene to_raw_frame(const Scene& scene) {
  if (scene.frame == Frame::raw) return scene;
  Scene out = map_positions(scene, [&](Vec2 p) { return scene.transform.invert(p); });
  out.frame = Frame::raw;
  out.transform = RigidTransform{};
  return out;
}

Scene subset(const Scene& scene, const std::vector<std::size_t>& keep) {
  if (keep.empty() || keep.front() != 0) throw DataError("subset must keep the target first");
  Scene out = scene;
  out.tracks.clear();
  for (std::size_t i : keep) out.tracks.push_back(scene.tracks.at(i));
  if (out.causal_id && !out.index_of(*out.causal_id)) out.causal_id.reset();
  return out;
}

Scene without_future(const Scene& scene) {
  Scene out = scene;
  for (Track& tr : out.tracks)
    std::erase_if(tr.obs, [](const Observation& o) { return o.t > 0; });
  return out;
}

}  // namespace crat::data
