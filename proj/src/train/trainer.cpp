#include "crat/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "crat/core/errors.hpp"
#include "crat/eval/metrics.hpp"
#include "crat/train/loss.hpp"
#include "json.hpp"

namespace crat::train {

using model::CratModel;
using model::ModelConfig;
namespace names = model::names;

void TrainConfig::validate() const {
  auto fail = [](const std::string& why) { throw std::invalid_argument("train config: " + why); };
  for (const auto* s : {&stage1, &stage2}) {
    if (s->epochs < 0) fail("negative epoch count");
    if (s->lr <= 0 || s->decayed_lr <= 0) fail("learning rates must be positive");
    if (s->decay_epoch < 0 || s->decay_epoch > s->epochs) fail("decay epoch outside the stage");
  }
  if (batch_size == 0) fail("batch size must be positive");
  if (beta <= 0) fail("smooth-L1 beta must be positive");
  if (adam.weight_decay < 0 || init_noise < 0) fail("negative weight decay or init noise");
}

void apply_freeze_mask(ParamStore& params, const ModelConfig& config, Stage stage) {
  auto is_new_decoder = [&](const std::string& name) {
    for (std::size_t m = 1; m < config.modes; ++m)
      if (name.starts_with(names::decoder_prefix(m))) return true;
    return false;
  };
  if (stage == Stage::one) {
    params.set_trainable([&](const std::string& n) { return !is_new_decoder(n); });
  } else {
    params.set_trainable(is_new_decoder);
  }
}

std::string EpochLog::to_json() const {
  nlohmann::ordered_json j;
  j["stage"] = stage;
  j["epoch"] = epoch;
  j["lr"] = lr;
  j["train_loss"] = train_loss;
  j["val_minADE1"] = val_min_ade_1 ? nlohmann::json(*val_min_ade_1) : nlohmann::json(nullptr);
  if (stage == 2) {
    j["val_minADEk"] = val_min_ade_k ? nlohmann::json(*val_min_ade_k) : nlohmann::json(nullptr);
    j["train_winners"] = train_winners;
    j["val_winners"] = val_winners;
  }
  return j.dump();
}

namespace {

struct Prepared {
  std::vector<data::Scene> scenes;  // target-local
  Array2 targets;                   // n × 2T_f
};

Prepared prepare(std::span<const data::Scene> in, const ModelConfig& c) {
  Prepared p;
  p.targets = Array2(in.size(), c.output_dim());
  for (std::size_t i = 0; i < in.size(); ++i) {
    p.scenes.push_back(data::to_target_frame(in[i]));
    const auto& s = p.scenes.back();
    if (s.future != c.future || !s.has_full_future()) {
      throw DataError("training scene '" + s.name + "' lacks a full " + std::to_string(c.future) + "-step future");
    }
    const auto fut = s.target_future();
    for (std::size_t t = 0; t < fut.size(); ++t) {
      p.targets(i, 2 * t) = fut[t].x;
      p.targets(i, 2 * t + 1) = fut[t].y;
    }
  }
  return p;
}

Array2 target_rows(const Array2& targets, std::span<const std::size_t> idx) {
  Array2 out(idx.size(), targets.cols);
  for (std::size_t r = 0; r < idx.size(); ++r) std::copy_n(targets.row(idx[r]).begin(), targets.cols, out.row(r).begin());
  return out;
}

std::vector<std::vector<std::size_t>> batches(std::size_t n, std::size_t size, bool shuffle, std::uint64_t seed,
                                              int stage, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (shuffle) {
    std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + std::uint64_t(stage) * 1000003ULL + std::uint64_t(epoch));
    std::shuffle(order.begin(), order.end(), rng);
  }
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t lo = 0; lo < n; lo += size) {
    out.emplace_back(order.begin() + long(lo), order.begin() + long(std::min(n, lo + size)));
  }
  return out;
}

void check_finite(double loss, int stage, int epoch, std::size_t batch) {
  if (!std::isfinite(loss)) {
    throw NumericalError("non-finite loss in stage " + std::to_string(stage) + ", epoch " + std::to_string(epoch) +
                         ", batch " + std::to_string(batch + 1));
  }
}

void save_epoch(const TrainConfig& tc, const CratModel& m, int stage, int epoch) {
  if (tc.checkpoint_dir.empty()) return;
  std::filesystem::create_directories(tc.checkpoint_dir);
  m.save(tc.checkpoint_dir / ("stage" + std::to_string(stage) + "_epoch" + std::to_string(epoch) + ".ckpt"));
}

double val_ade(const CratModel& m, std::span<const data::Scene> val, std::size_t k) {
  return eval::evaluate(m, val, k).min_ade;
}

// Target-row interaction features of a frozen, evaluation-mode backbone.
Array2 frozen_features(const CratModel& m, std::span<const data::Scene> local) {
  const ModelConfig& c = m.config();
  Array2 out(local.size(), c.hidden);
  constexpr std::size_t chunk = 64;
  for (std::size_t lo = 0; lo < local.size(); lo += chunk) {
    const auto part = local.subspan(lo, std::min(local.size(), lo + chunk) - lo);
    const auto batch = model::make_batch(part, c.history);
    ad::Graph g;
    const BoundParams p(g, m.params(), false);
    const auto bb = model::run_backbone(p, c, batch, model::NormMode::eval);
    for (std::size_t s = 0; s < part.size(); ++s) {
      std::copy_n(bb.interaction.value().row(batch.target_row(s)).begin(), c.hidden, out.row(lo + s).begin());
    }
  }
  return out;
}

std::vector<std::size_t> candidates(const ModelConfig& c, bool include0) {
  std::vector<std::size_t> out;
  for (std::size_t m = include0 ? 0 : 1; m < c.modes; ++m) out.push_back(m);
  return out;
}

}  // namespace

std::vector<EpochLog> train_stage1(CratModel& model, std::span<const data::Scene> train_set,
                                   std::span<const data::Scene> val_set, const TrainConfig& tc,
                                   const EpochCallback& on_epoch) {
  tc.validate();
  if (train_set.empty()) throw DataError("training split is empty");
  const ModelConfig& c = model.config();
  const Prepared tr = prepare(train_set, c);
  apply_freeze_mask(model.params(), c, Stage::one);
  model.set_active_modes(1);
  Adam adam(tc.adam);
  std::vector<EpochLog> log;
  for (int epoch = 1; epoch <= tc.stage1.epochs; ++epoch) {
    EpochLog e;
    e.stage = 1;
    e.epoch = epoch;
    e.lr = tc.stage1.lr_at(epoch);
    model.set_trained_stage(std::max(model.trained_stage(), 1));
    double total = 0.0;
    const auto plan = batches(tr.scenes.size(), tc.batch_size, tc.shuffle, tc.seed, 1, epoch);
    for (std::size_t b = 0; b < plan.size(); ++b) {
      std::vector<data::Scene> scenes;
      for (std::size_t i : plan[b]) scenes.push_back(tr.scenes[i]);
      const auto batch = model::make_batch(scenes, c.history);
      ad::Graph g;
      const BoundParams p(g, model.params());
      const auto bb = model::run_backbone(p, c, batch, model::NormMode::train);
      std::vector<std::size_t> rows;
      for (std::size_t s = 0; s < batch.scenes(); ++s) rows.push_back(batch.target_row(s));
      const ad::Var out = model::run_decoder(p, c, ad::gather_rows(bb.interaction, rows), 0);
      const ad::Var loss = ad::smooth_l1(out, target_rows(tr.targets, plan[b]), tc.beta);
      check_finite(loss.value().data[0], 1, epoch, b);
      g.backward(loss);
      adam.step(model.params(), p.gradients(), e.lr);
      model::update_running_stats(model.params(), c, bb.gnn_stats);
      total += loss.value().data[0] * double(plan[b].size());
    }
    e.train_loss = total / double(tr.scenes.size());
    if (!val_set.empty()) e.val_min_ade_1 = val_ade(model, val_set, 1);
    save_epoch(tc, model, 1, epoch);
    if (on_epoch) on_epoch(e, model);
    log.push_back(std::move(e));
  }
  return log;
}

std::vector<EpochLog> train_stage2(CratModel& model, std::span<const data::Scene> train_set,
                                   std::span<const data::Scene> val_set, const TrainConfig& tc,
                                   const EpochCallback& on_epoch) {
  tc.validate();
  if (train_set.empty()) throw DataError("training split is empty");
  const ModelConfig& c = model.config();
  if (c.modes < 2) return {};
  const Prepared tr = prepare(train_set, c);
  ParamStore& params = model.params();

  // New decoders start from decoder 0 (or fresh weights) before freezing.
  {
    std::mt19937_64 rng(tc.seed ^ 0x5851f42d4c957f2dULL);
    std::uniform_real_distribution<double> noise(-tc.init_noise, tc.init_noise);
    const ParamStore fresh = tc.decoder_init == DecoderInit::fresh ? model::init_params(c, tc.seed + 1) : ParamStore{};
    for (std::size_t m = 1; m < c.modes; ++m) {
      for (auto& p : params.items()) {
        if (!p.name.starts_with(names::decoder_prefix(m))) continue;
        if (tc.decoder_init == DecoderInit::fresh) {
          p.value = fresh.value(p.name);
        } else {
          const std::string field = p.name.substr(names::decoder_prefix(m).size());
          p.value = params.value(names::decoder(0, field));
          for (double& v : p.value.data) v += noise(rng);
        }
      }
    }
  }
  apply_freeze_mask(params, c, Stage::two);
  model.set_active_modes(c.modes);

  const Array2 features = frozen_features(model, tr.scenes);
  const auto cand = candidates(c, tc.wta_includes_decoder0);
  Adam adam(tc.adam);
  std::vector<EpochLog> log;
  for (int epoch = 1; epoch <= tc.stage2.epochs; ++epoch) {
    EpochLog e;
    e.stage = 2;
    e.epoch = epoch;
    e.lr = tc.stage2.lr_at(epoch);
    model.set_trained_stage(2);
    e.train_winners.assign(c.modes, 0);
    double total = 0.0;
    const auto plan = batches(tr.scenes.size(), tc.batch_size, tc.shuffle, tc.seed, 2, epoch);
    for (std::size_t b = 0; b < plan.size(); ++b) {
      ad::Graph g;
      const BoundParams p(g, params);
      const ad::Var a = g.constant(target_rows(features, plan[b]));
      std::vector<ad::Var> outs;
      for (std::size_t m = 0; m < c.modes; ++m) outs.push_back(model::run_decoder(p, c, a, m));
      std::vector<std::size_t> winners;
      const ad::Var loss = wta_batch_loss(outs, target_rows(tr.targets, plan[b]), tc.beta, cand, &winners);
      check_finite(loss.value().data[0], 2, epoch, b);
      for (std::size_t w : winners) ++e.train_winners[w];
      if (loss.requires_grad()) {
        g.backward(loss);
        adam.step(params, p.gradients(), e.lr);
      }
      total += loss.value().data[0] * double(plan[b].size());
    }
    e.train_loss = total / double(tr.scenes.size());
    if (!val_set.empty()) {
      e.val_min_ade_1 = val_ade(model, val_set, 1);
      e.val_min_ade_k = val_ade(model, val_set, c.modes);
      e.val_winners.assign(c.modes, 0);
      for (std::size_t w : wta_winners(model, val_set, tc.beta)) ++e.val_winners[w];
    }
    save_epoch(tc, model, 2, epoch);
    if (on_epoch) on_epoch(e, model);
    log.push_back(std::move(e));
  }
  return log;
}

TrainResult train(std::span<const data::Scene> train_set, std::span<const data::Scene> val_set,
                  const ModelConfig& model_config, const TrainConfig& tc, const EpochCallback& on_epoch) {
  tc.validate();
  TrainResult r{CratModel(model_config, tc.seed), {}};
  r.log = train_stage1(r.model, train_set, val_set, tc, on_epoch);
  if (tc.run_stage2 && model_config.modes > 1) {
    auto more = train_stage2(r.model, train_set, val_set, tc, on_epoch);
    r.log.insert(r.log.end(), more.begin(), more.end());
  }
  return r;
}

std::vector<std::size_t> wta_winners(const CratModel& model, std::span<const data::Scene> scenes, double beta) {
  const auto preds = eval::predict_local(model, scenes, model.active_modes());
  std::vector<std::size_t> out;
  out.reserve(scenes.size());
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    out.push_back(wta_loss(preds[i], eval::target_ground_truth(scenes[i]), beta).winner);
  }
  return out;
}

}  // namespace crat::train
