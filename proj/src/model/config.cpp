#include "crat/model/config.hpp"

#include "crat/core/errors.hpp"
#include "json.hpp"

namespace crat::model {

std::string ModelConfig::descriptor() const {
  nlohmann::ordered_json j;
  j["T_h"] = history;
  j["T_f"] = future;
  j["input_dim"] = input_dim;
  j["hidden"] = hidden;
  j["L_g"] = gnn_layers;
  j["L_h"] = heads;
  j["decoder_groups"] = decoder_groups;
  j["k"] = modes;
  j["use_attention"] = use_attention;
  j["gnn_norm"] = gnn_norm == GnnNormPlacement::after_each ? "after_each" : "before_each";
  j["norm_eps"] = norm_eps;
  j["bn_momentum"] = bn_momentum;
  return j.dump();
}

ModelConfig ModelConfig::from_descriptor(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    ModelConfig c;
    c.history = j.at("T_h").get<int>();
    c.future = j.at("T_f").get<int>();
    c.input_dim = j.at("input_dim").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::size_t>();
    c.gnn_layers = j.at("L_g").get<std::size_t>();
    c.heads = j.at("L_h").get<std::size_t>();
    c.decoder_groups = j.at("decoder_groups").get<std::size_t>();
    c.modes = j.at("k").get<std::size_t>();
    c.use_attention = j.at("use_attention").get<bool>();
    const auto placement = j.at("gnn_norm").get<std::string>();
    if (placement == "after_each") c.gnn_norm = GnnNormPlacement::after_each;
    else if (placement == "before_each") c.gnn_norm = GnnNormPlacement::before_each;
    else throw DataError("unknown gnn_norm placement '" + placement + "'");
    c.norm_eps = j.at("norm_eps").get<double>();
    c.bn_momentum = j.at("bn_momentum").get<double>();
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad architecture descriptor: ") + e.what());
  }
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& why) { throw DataError("model config: " + why); };
  if (history < 2 || future < 1) fail("history must be >= 2 and future >= 1");
  if (hidden == 0 || input_dim == 0) fail("zero width");
  if (modes == 0) fail("need at least one mode");
  if (use_attention && (heads == 0 || hidden % heads != 0)) fail("heads must divide hidden");
  if (decoder_groups == 0 || hidden % decoder_groups != 0) fail("decoder_groups must divide hidden");
}

}  // namespace crat::model
