#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "crat/data/synthetic.hpp"
#include "crat/experiment/selection.hpp"
#include "crat/model/config.hpp"
#include "crat/train/trainer.hpp"
#include "json.hpp"

namespace crat::cli {

// Bad flags, unknown config keys, values of the wrong type.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Json = nlohmann::ordered_json;

struct DataGenConfig {
  data::ScenarioKind kind = data::ScenarioKind::leader_follower;
  std::uint64_t seed = 0;
  std::size_t n_train = 200;
  std::size_t n_val = 50;
  std::size_t n_test = 0;
  data::SyntheticConfig synthetic;
};

/// Everything a subcommand may read. Each section maps 1:1 onto a JSON object
/// of the same name; see configs/example.json.
struct RunConfig {
  std::uint64_t seed = 0;  // model initialization and shuffling
  DataGenConfig data;
  model::ModelConfig model;
  train::TrainConfig training;
  std::size_t eval_k = 6;
  experiment::ExperimentConfig experiment;
};

Json to_json(const RunConfig& config);
/// Requires every key of to_json(RunConfig{}); throws UsageError otherwise.
RunConfig from_json(const Json& j);

/// Defaults, then the file (if any), then `key.path=value` overrides. Unknown
/// keys anywhere are rejected. Values parse as JSON, falling back to a string.
RunConfig resolve(const std::filesystem::path& file, const std::vector<std::string>& overrides);

/// Writes the fully resolved config as `resolved_config.json` in `dir`.
void write_resolved(const std::filesystem::path& dir, const RunConfig& config);

}  // namespace crat::cli
