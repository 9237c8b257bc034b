#include "crat/data/encoding.hpp"

#include "crat/core/errors.hpp"

namespace crat::data {

std::vector<ActorInput> encode_inputs(const Scene& scene) {
  if (scene.frame != Frame::target_local) throw DataError("encode_inputs expects a target-local scene");
  std::vector<ActorInput> out;
  out.reserve(scene.tracks.size());
  const int first = scene.first_step();
  for (const Track& tr : scene.tracks) {
    ActorInput in{tr.id, Array2(std::size_t(scene.history), 3), *tr.at(0)};
    for (int t = first + 1; t <= 0; ++t) {
      const auto cur = tr.at(t);
      const auto prev = tr.at(t - 1);
      if (!cur || !prev) continue;
      const std::size_t k = std::size_t(t - first);
      in.steps(k, 0) = cur->x - prev->x;
      in.steps(k, 1) = cur->y - prev->y;
      in.steps(k, 2) = 1.0;
    }
    out.push_back(std::move(in));
  }
  return out;
}

}  // namespace crat::data
