#include "crat/cli/config.hpp"

#include <fstream>

#include "crat/core/errors.hpp"

namespace crat::cli {

namespace {

Json schedule_json(const train::StageSchedule& s) {
  return Json{{"epochs", s.epochs}, {"decay_epoch", s.decay_epoch}, {"lr", s.lr}, {"decayed_lr", s.decayed_lr}};
}

train::StageSchedule schedule_from(const Json& j) {
  train::StageSchedule s;
  s.epochs = j.at("epochs").get<int>();
  s.decay_epoch = j.at("decay_epoch").get<int>();
  s.lr = j.at("lr").get<double>();
  s.decayed_lr = j.at("decayed_lr").get<double>();
  return s;
}

Json model_json(const model::ModelConfig& m) { return Json::parse(m.descriptor()); }

model::ModelConfig model_from(const Json& j) {
  try {
    return model::ModelConfig::from_descriptor(j.dump());
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }
}

Json training_json(const train::TrainConfig& t) {
  Json j;
  j["stage1"] = schedule_json(t.stage1);
  j["stage2"] = schedule_json(t.stage2);
  j["run_stage2"] = t.run_stage2;
  j["batch_size"] = t.batch_size;
  j["adam"] = Json{{"beta1", t.adam.beta1}, {"beta2", t.adam.beta2}, {"eps", t.adam.eps},
                   {"weight_decay", t.adam.weight_decay}};
  j["smooth_l1_beta"] = t.beta;
  j["shuffle"] = t.shuffle;
  j["wta_includes_decoder0"] = t.wta_includes_decoder0;
  j["decoder_init"] = t.decoder_init == train::DecoderInit::fresh ? "fresh" : "copy_with_noise";
  j["init_noise"] = t.init_noise;
  return j;
}

train::TrainConfig training_from(const Json& j) {
  train::TrainConfig t;
  t.stage1 = schedule_from(j.at("stage1"));
  t.stage2 = schedule_from(j.at("stage2"));
  t.run_stage2 = j.at("run_stage2").get<bool>();
  t.batch_size = j.at("batch_size").get<std::size_t>();
  const Json& a = j.at("adam");
  t.adam.beta1 = a.at("beta1").get<double>();
  t.adam.beta2 = a.at("beta2").get<double>();
  t.adam.eps = a.at("eps").get<double>();
  t.adam.weight_decay = a.at("weight_decay").get<double>();
  t.beta = j.at("smooth_l1_beta").get<double>();
  t.shuffle = j.at("shuffle").get<bool>();
  t.wta_includes_decoder0 = j.at("wta_includes_decoder0").get<bool>();
  const auto init = j.at("decoder_init").get<std::string>();
  if (init == "fresh") t.decoder_init = train::DecoderInit::fresh;
  else if (init == "copy_with_noise") t.decoder_init = train::DecoderInit::copy_with_noise;
  else throw UsageError("training.decoder_init must be 'copy_with_noise' or 'fresh', got '" + init + "'");
  t.init_noise = j.at("init_noise").get<double>();
  try {
    t.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return t;
}

Json synthetic_json(const data::SyntheticConfig& s) {
  return Json{{"min_speed", s.min_speed},
              {"max_speed", s.max_speed},
              {"crowd_radius", s.crowd_radius},
              {"crowd_min_vehicles", s.crowd_min_vehicles},
              {"crowd_max_vehicles", s.crowd_max_vehicles},
              {"late_entry_prob", s.late_entry_prob},
              {"departed_vehicle_prob", s.departed_vehicle_prob},
              {"min_headway", s.min_headway},
              {"max_headway", s.max_headway},
              {"min_decel", s.min_decel},
              {"max_decel", s.max_decel},
              {"reaction_time", s.reaction_time},
              {"reaction_jitter", s.reaction_jitter},
              {"min_distractors", s.min_distractors},
              {"max_distractors", s.max_distractors},
              {"turn_speed", s.turn_speed},
              {"turn_radius", s.turn_radius},
              {"turn_entry", s.turn_entry},
              {"turn_speed_jitter", s.turn_speed_jitter},
              {"left_turn_prob", s.left_turn_prob},
              {"min_bystanders", s.min_bystanders},
              {"max_bystanders", s.max_bystanders}};
}

data::SyntheticConfig synthetic_from(const Json& j) {
  data::SyntheticConfig s;
  s.min_speed = j.at("min_speed").get<double>();
  s.max_speed = j.at("max_speed").get<double>();
  s.crowd_radius = j.at("crowd_radius").get<double>();
  s.crowd_min_vehicles = j.at("crowd_min_vehicles").get<int>();
  s.crowd_max_vehicles = j.at("crowd_max_vehicles").get<int>();
  s.late_entry_prob = j.at("late_entry_prob").get<double>();
  s.departed_vehicle_prob = j.at("departed_vehicle_prob").get<double>();
  s.min_headway = j.at("min_headway").get<double>();
  s.max_headway = j.at("max_headway").get<double>();
  s.min_decel = j.at("min_decel").get<double>();
  s.max_decel = j.at("max_decel").get<double>();
  s.reaction_time = j.at("reaction_time").get<double>();
  s.reaction_jitter = j.at("reaction_jitter").get<double>();
  s.min_distractors = j.at("min_distractors").get<int>();
  s.max_distractors = j.at("max_distractors").get<int>();
  s.turn_speed = j.at("turn_speed").get<double>();
  s.turn_radius = j.at("turn_radius").get<double>();
  s.turn_entry = j.at("turn_entry").get<double>();
  s.turn_speed_jitter = j.at("turn_speed_jitter").get<double>();
  s.left_turn_prob = j.at("left_turn_prob").get<double>();
  s.min_bystanders = j.at("min_bystanders").get<int>();
  s.max_bystanders = j.at("max_bystanders").get<int>();
  return s;
}

// Copies `patch` into `base`, refusing keys that `base` does not have.
void merge_known(Json& base, const Json& patch, const std::string& path) {
  if (!patch.is_object()) throw UsageError("config" + (path.empty() ? "" : " key '" + path + "'") + " must be an object");
  for (const auto& [key, value] : patch.items()) {
    const std::string here = path.empty() ? key : path + "." + key;
    if (!base.contains(key)) throw UsageError("unknown config key '" + here + "'");
    if (base[key].is_object()) merge_known(base[key], value, here);
    else base[key] = value;
  }
}

}  // namespace

Json to_json(const RunConfig& c) {
  Json j;
  j["seed"] = c.seed;
  j["data"] = Json{{"kind", data::to_string(c.data.kind)},
                   {"seed", c.data.seed},
                   {"n_train", c.data.n_train},
                   {"n_val", c.data.n_val},
                   {"n_test", c.data.n_test},
                   {"synthetic", synthetic_json(c.data.synthetic)}};
  j["model"] = model_json(c.model);
  j["training"] = training_json(c.training);
  j["eval"] = Json{{"k", c.eval_k}};
  Json strategies = Json::array();
  for (auto s : c.experiment.strategies) strategies.push_back(experiment::to_string(s));
  j["experiment"] = Json{{"budgets", c.experiment.budgets},
                         {"seeds", c.experiment.seeds},
                         {"strategies", strategies},
                         {"k", c.experiment.k},
                         {"predictor", model_json(c.experiment.predictor)},
                         {"predictor_training", training_json(c.experiment.predictor_training)}};
  return j;
}

RunConfig from_json(const Json& j) {
  try {
    RunConfig c;
    c.seed = j.at("seed").get<std::uint64_t>();
    const Json& d = j.at("data");
    c.data.kind = data::scenario_from_string(d.at("kind").get<std::string>());
    c.data.seed = d.at("seed").get<std::uint64_t>();
    c.data.n_train = d.at("n_train").get<std::size_t>();
    c.data.n_val = d.at("n_val").get<std::size_t>();
    c.data.n_test = d.at("n_test").get<std::size_t>();
    c.data.synthetic = synthetic_from(d.at("synthetic"));
    c.model = model_from(j.at("model"));
    c.training = training_from(j.at("training"));
    c.eval_k = j.at("eval").at("k").get<std::size_t>();
    const Json& e = j.at("experiment");
    c.experiment.budgets = e.at("budgets").get<std::vector<std::size_t>>();
    c.experiment.seeds = e.at("seeds").get<std::vector<std::uint64_t>>();
    c.experiment.strategies.clear();
    for (const auto& s : e.at("strategies")) c.experiment.strategies.push_back(experiment::strategy_from_string(s.get<std::string>()));
    c.experiment.k = e.at("k").get<std::size_t>();
    c.experiment.predictor = model_from(e.at("predictor"));
    c.experiment.predictor_training = training_from(e.at("predictor_training"));
    if (c.eval_k == 0 || c.experiment.k == 0) throw UsageError("k must be positive");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("config: ") + e.what());
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }
}

RunConfig resolve(const std::filesystem::path& file, const std::vector<std::string>& overrides) {
  Json j = to_json(RunConfig{});
  if (!file.empty()) {
    std::ifstream in(file);
    if (!in) throw DataError("cannot read config file " + file.string());
    Json patch;
    try {
      patch = Json::parse(in, nullptr, true, true);  // comments allowed
    } catch (const nlohmann::json::exception& e) {
      throw UsageError("config file " + file.string() + ": " + e.what());
    }
    merge_known(j, patch, "");
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("override '" + o + "' is not key.path=value");
    const std::string path = o.substr(0, eq), text = o.substr(eq + 1);
    Json value;
    try {
      value = Json::parse(text);
    } catch (const nlohmann::json::exception&) {
      value = text;
    }
    Json patch = value;
    for (std::size_t end = path.size(); end != std::string::npos;) {
      const auto dot = path.rfind('.', end - 1);
      const std::string key = path.substr(dot == std::string::npos ? 0 : dot + 1, end - (dot == std::string::npos ? 0 : dot + 1));
      patch = Json{{key, patch}};
      if (dot == std::string::npos) break;
      end = dot;
    }
    merge_known(j, patch, "");
  }
  return from_json(j);
}

void write_resolved(const std::filesystem::path& dir, const RunConfig& config) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "resolved_config.json");
  if (!out) throw DataError("cannot write " + (dir / "resolved_config.json").string());
  out << to_json(config).dump(2) << '\n';
}

}  // namespace crat::cli
