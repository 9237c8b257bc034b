#include "crat/model/network.hpp"

#include <cmath>
#include <random>

#include "crat/core/checkpoint.hpp"
#include "crat/core/errors.hpp"
#include "crat/data/encoding.hpp"
#include "json.hpp"

namespace crat::model {

using ad::Var;

namespace names {
std::string encoder(const std::string& field) { return kEncoderPrefix + field; }
std::string gnn(std::size_t layer, const std::string& field) {
  return kGnnPrefix + std::to_string(layer) + "." + field;
}
std::string attention(const std::string& field) { return kAttentionPrefix + field; }
std::string decoder_prefix(std::size_t mode) { return "decoder." + std::to_string(mode) + "."; }
std::string decoder(std::size_t mode, const std::string& field) { return decoder_prefix(mode) + field; }
}  // namespace names

namespace {

struct Shape {
  std::string name;
  std::size_t rows, cols;
  enum Kind { weight, zero, one, buffer_zero, buffer_one } kind;
  std::size_t fan_in = 0;
};

std::vector<Shape> layout(const ModelConfig& c) {
  const std::size_t H = c.hidden, G = 4 * c.hidden;
  std::vector<Shape> out;
  // The LSTM scales both matrices by the hidden width.
  out.push_back({names::encoder("w_ih"), G, c.input_dim, Shape::weight, H});
  out.push_back({names::encoder("w_hh"), G, H, Shape::weight, H});
  out.push_back({names::encoder("b_ih"), 1, G, Shape::zero});
  out.push_back({names::encoder("b_hh"), 1, G, Shape::zero});
  const std::size_t z = 2 * H + c.edge_dim();
  for (std::size_t g = 0; g < c.gnn_layers; ++g) {
    out.push_back({names::gnn(g, "w_f"), z, H, Shape::weight, z});
    out.push_back({names::gnn(g, "b_f"), 1, H, Shape::zero});
    out.push_back({names::gnn(g, "w_s"), z, H, Shape::weight, z});
    out.push_back({names::gnn(g, "b_s"), 1, H, Shape::zero});
    out.push_back({names::gnn(g, "bn.gamma"), 1, H, Shape::one});
    out.push_back({names::gnn(g, "bn.beta"), 1, H, Shape::zero});
    out.push_back({names::gnn(g, "bn.running_mean"), 1, H, Shape::buffer_zero});
    out.push_back({names::gnn(g, "bn.running_var"), 1, H, Shape::buffer_one});
  }
  if (c.use_attention) {
    for (const char* m : {"q", "k", "v", "o"}) {
      out.push_back({names::attention(std::string("w_") + m), H, H, Shape::weight, H});
      out.push_back({names::attention(std::string("b_") + m), 1, H, Shape::zero});
    }
  }
  for (std::size_t m = 0; m < c.modes; ++m) {
    out.push_back({names::decoder(m, "w_r2"), H, H, Shape::weight, H});
    out.push_back({names::decoder(m, "b_r2"), 1, H, Shape::zero});
    out.push_back({names::decoder(m, "gn2.gamma"), 1, H, Shape::one});
    out.push_back({names::decoder(m, "gn2.beta"), 1, H, Shape::zero});
    out.push_back({names::decoder(m, "w_r1"), H, H, Shape::weight, H});
    out.push_back({names::decoder(m, "b_r1"), 1, H, Shape::zero});
    out.push_back({names::decoder(m, "gn1.gamma"), 1, H, Shape::one});
    out.push_back({names::decoder(m, "gn1.beta"), 1, H, Shape::zero});
    out.push_back({names::decoder(m, "w_dec"), H, c.output_dim(), Shape::weight, H});
    out.push_back({names::decoder(m, "b_dec"), 1, c.output_dim(), Shape::zero});
  }
  return out;
}

}  // namespace

ParamStore init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  ParamStore store;
  for (const auto& s : layout(config)) {
    Array2 a(s.rows, s.cols);
    bool learnable = true;
    switch (s.kind) {
      case Shape::weight: {
        const double bound = 1.0 / std::sqrt(double(s.fan_in));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (double& v : a.data) v = u(rng);
        break;
      }
      case Shape::zero: break;
      case Shape::one: a = Array2(s.rows, s.cols, 1.0); break;
      case Shape::buffer_zero: learnable = false; break;
      case Shape::buffer_one: a = Array2(s.rows, s.cols, 1.0); learnable = false; break;
    }
    store.add(s.name, std::move(a), learnable);
  }
  return store;
}

void check_params(const ModelConfig& config, const ParamStore& params) {
  const auto expected = layout(config);
  if (expected.size() != params.size()) {
    throw DataError("parameter set has " + std::to_string(params.size()) + " arrays, architecture needs " +
                    std::to_string(expected.size()));
  }
  for (const auto& s : expected) {
    if (!params.contains(s.name)) throw DataError("parameter set lacks '" + s.name + "'");
    const Array2& v = params.value(s.name);
    if (v.rows != s.rows || v.cols != s.cols) {
      throw DataError("parameter '" + s.name + "' is " + v.shape_str() + ", architecture needs " +
                      std::to_string(s.rows) + "x" + std::to_string(s.cols));
    }
  }
}

ParameterBreakdown parameter_breakdown(const ModelConfig& c) {
  const std::size_t H = c.hidden, I = c.input_dim, z = 2 * H + c.edge_dim(), O = c.output_dim();
  ParameterBreakdown b;
  b.encoder = 4 * H * I + 4 * H * H + 2 * 4 * H;
  b.gnn = c.gnn_layers * (2 * (z * H + H) + 2 * H);
  b.attention = c.use_attention ? 4 * (H * H + H) : 0;
  b.per_decoder = 2 * (H * H + H) + 2 * (2 * H) + H * O + O;
  b.decoders = c.modes * b.per_decoder;
  return b;
}

std::size_t count_parameters(const ParamStore& params, bool include_attention) {
  const std::size_t all = params.learnable_count();
  return include_attention ? all : all - params.learnable_count(names::kAttentionPrefix);
}

SceneBatch make_batch(std::span<const data::Scene> scenes, int history) {
  if (scenes.empty()) throw DataError("make_batch: no scenes");
  SceneBatch b;
  b.offsets.push_back(0);
  std::vector<data::ActorInput> inputs;
  for (const auto& s : scenes) {
    if (s.frame != data::Frame::target_local) throw DataError("make_batch: scene '" + s.name + "' is not target-local");
    if (s.history != history) {
      throw DataError("make_batch: scene '" + s.name + "' has T_h=" + std::to_string(s.history) + ", model expects " +
                      std::to_string(history));
    }
    auto in = data::encode_inputs(s);
    const std::size_t base = b.positions.size();
    std::vector<data::Vec2> pos;
    for (auto& a : in) {
      pos.push_back(a.position);
      inputs.push_back(std::move(a));
    }
    const EdgeList local = build_graph(pos);
    for (std::size_t e = 0; e < local.size(); ++e) {
      b.edges.receiver.push_back(base + local.receiver[e]);
      b.edges.sender.push_back(base + local.sender[e]);
    }
    b.edges.features.data.insert(b.edges.features.data.end(), local.features.data.begin(), local.features.data.end());
    b.edges.features.rows += local.size();
    b.positions.insert(b.positions.end(), pos.begin(), pos.end());
    b.offsets.push_back(b.positions.size());
  }
  b.steps = steps_by_time(inputs);
  return b;
}

namespace {

Var gnn_norm(const BoundParams& p, const ModelConfig& c, const Var& x, std::size_t g, NormMode mode,
             std::vector<ad::BatchStats>& stats) {
  const Var& gamma = p[names::gnn(g, "bn.gamma")];
  const Var& beta = p[names::gnn(g, "bn.beta")];
  if (mode == NormMode::train) {
    ad::BatchStats s;
    const Var y = ad::batch_norm_train(x, gamma, beta, c.norm_eps, &s);
    stats.push_back(std::move(s));
    return ad::relu(y);
  }
  return ad::relu(ad::batch_norm_eval(x, gamma, beta, p[names::gnn(g, "bn.running_mean")].value(),
                                      p[names::gnn(g, "bn.running_var")].value(), c.norm_eps));
}

}  // namespace

BackboneOutput run_backbone(const BoundParams& p, const ModelConfig& c, const SceneBatch& batch, NormMode mode) {
  BackboneOutput out;
  const LstmWeights lstm{p[names::encoder("w_ih")], p[names::encoder("w_hh")], p[names::encoder("b_ih")],
                         p[names::encoder("b_hh")]};
  Var v = encode_actors(batch.steps, lstm, p.graph());
  for (std::size_t g = 0; g < c.gnn_layers; ++g) {
    const CgconvWeights w{p[names::gnn(g, "w_f")], p[names::gnn(g, "b_f")], p[names::gnn(g, "w_s")],
                          p[names::gnn(g, "b_s")]};
    if (c.gnn_norm == GnnNormPlacement::before_each) v = gnn_norm(p, c, v, g, mode, out.gnn_stats);
    v = cgconv_layer(v, batch.edges, w);
    if (c.gnn_norm == GnnNormPlacement::after_each) v = gnn_norm(p, c, v, g, mode, out.gnn_stats);
  }
  if (c.use_attention) {
    AttentionWeights w{p[names::attention("w_q")], p[names::attention("b_q")], p[names::attention("w_k")],
                       p[names::attention("b_k")], p[names::attention("w_v")], p[names::attention("b_v")],
                       p[names::attention("w_o")], p[names::attention("b_o")], c.heads};
    auto att = self_attention(v, batch.offsets, w);
    out.interaction = att.output;
    out.attention = std::move(att.records);
  } else {
    out.interaction = v;
  }
  return out;
}

Var run_decoder(const BoundParams& p, const ModelConfig& c, const Var& interaction, std::size_t m) {
  if (m >= c.modes) throw ShapeError("run_decoder: mode " + std::to_string(m) + " of " + std::to_string(c.modes));
  const DecoderWeights w{p[names::decoder(m, "w_r2")],      p[names::decoder(m, "b_r2")],
                         p[names::decoder(m, "gn2.gamma")], p[names::decoder(m, "gn2.beta")],
                         p[names::decoder(m, "w_r1")],      p[names::decoder(m, "b_r1")],
                         p[names::decoder(m, "gn1.gamma")], p[names::decoder(m, "gn1.beta")],
                         p[names::decoder(m, "w_dec")],     p[names::decoder(m, "b_dec")]};
  return decode(interaction, w, c.decoder_groups, c.norm_eps);
}

void update_running_stats(ParamStore& params, const ModelConfig& c, std::span<const ad::BatchStats> stats) {
  if (stats.size() != c.gnn_layers) {
    throw ShapeError("update_running_stats: " + std::to_string(stats.size()) + " stat sets for " +
                     std::to_string(c.gnn_layers) + " layers");
  }
  const double mom = c.bn_momentum;
  for (std::size_t g = 0; g < stats.size(); ++g) {
    Array2& rm = params.value(names::gnn(g, "bn.running_mean"));
    Array2& rv = params.value(names::gnn(g, "bn.running_var"));
    for (std::size_t i = 0; i < rm.size(); ++i) {
      rm.data[i] = (1.0 - mom) * rm.data[i] + mom * stats[g].mean.data[i];
      rv.data[i] = (1.0 - mom) * rv.data[i] + mom * stats[g].variance.data[i];
    }
  }
}

std::vector<Array2> PredictionSet::raw_modes() const {
  std::vector<Array2> out;
  for (const auto& m : modes) {
    Array2 r(m.rows, 2);
    for (std::size_t t = 0; t < m.rows; ++t) {
      const auto q = transform.invert({m(t, 0), m(t, 1)});
      r(t, 0) = q.x;
      r(t, 1) = q.y;
    }
    out.push_back(std::move(r));
  }
  return out;
}

CratModel::CratModel(ModelConfig config, std::uint64_t seed)
    : config_(config), params_(init_params(config, seed)), active_modes_(config.modes) {}

CratModel::CratModel(ModelConfig config, ParamStore params)
    : config_(config), params_(std::move(params)), active_modes_(config.modes) {
  config_.validate();
  check_params(config_, params_);
}

void CratModel::set_active_modes(std::size_t m) {
  if (m == 0 || m > config_.modes) {
    throw std::invalid_argument("active modes must be in [1, " + std::to_string(config_.modes) + "]");
  }
  active_modes_ = m;
}

std::vector<Prediction> CratModel::predict_batch(std::span<const data::Scene> scenes) const {
  std::vector<data::Scene> local;
  local.reserve(scenes.size());
  for (const auto& s : scenes) local.push_back(data::to_target_frame(s));
  const SceneBatch batch = make_batch(local, config_.history);
  ad::Graph graph;
  const BoundParams p(graph, params_, false);
  const BackboneOutput bb = run_backbone(p, config_, batch, NormMode::eval);
  std::vector<std::size_t> targets;
  for (std::size_t s = 0; s < batch.scenes(); ++s) targets.push_back(batch.target_row(s));
  const Var a = ad::gather_rows(bb.interaction, targets);
  std::vector<Prediction> out(scenes.size());
  for (std::size_t m = 0; m < active_modes_; ++m) {
    const Var o = run_decoder(p, config_, a, m);
    for (std::size_t s = 0; s < scenes.size(); ++s) {
      out[s].trajectories.modes.push_back(offsets_to_coordinates(o.value().row(s), batch.positions[targets[s]]));
    }
  }
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    out[s].trajectories.transform = local[s].transform;
    if (!bb.attention.empty()) out[s].attention = bb.attention[s];
  }
  return out;
}

Prediction CratModel::predict(const data::Scene& scene) const {
  auto out = predict_batch(std::span<const data::Scene>(&scene, 1));
  return std::move(out.front());
}

void CratModel::save(const std::filesystem::path& path) const {
  nlohmann::ordered_json j;
  j["model"] = nlohmann::json::parse(config_.descriptor());
  j["active_modes"] = active_modes_;
  j["trained_stage"] = trained_stage_;
  save_checkpoint(path, params_, j.dump());
}

CratModel CratModel::load(const std::filesystem::path& path) {
  Checkpoint ck = load_checkpoint(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ck.descriptor);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint " + path.string() + ": unreadable descriptor: " + e.what());
  }
  if (!j.contains("model") || !j.contains("active_modes")) {
    throw DataError("checkpoint " + path.string() + " carries no model descriptor");
  }
  CratModel model(ModelConfig::from_descriptor(j["model"].dump()), std::move(ck.params));
  model.set_active_modes(j["active_modes"].get<std::size_t>());
  model.set_trained_stage(j.value("trained_stage", 0));
  return model;
}

}  // namespace crat::model
