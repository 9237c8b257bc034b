#include "crat/cli/app.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <locale>
#include <sstream>

#include "CLI11.hpp"
#include "crat/cli/config.hpp"
#include "crat/core/errors.hpp"
#include "crat/data/csv_io.hpp"
#include "crat/eval/metrics.hpp"
#include "crat/viz/svg.hpp"

namespace crat::cli {

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config_file;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("-c,--config", c.config_file, "JSON config file (see configs/example.json)");
  sub->add_option("--set", c.overrides, "Override config values: --set training.batch_size=16 model.k=2");
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed: " + path.string());
}

std::string safe_name(std::string s) {
  for (char& ch : s)
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '_' && ch != '.') ch = '_';
  return s;
}

std::string grouped(std::size_t v) {
  std::string s = std::to_string(v);
  for (int i = int(s.size()) - 3; i > 0; i -= 3) s.insert(std::size_t(i), ",");
  return s;
}

data::Dataset load(const fs::path& manifest, const model::ModelConfig& m) {
  if (!fs::exists(manifest)) throw DataError("no such manifest: " + manifest.string());
  return data::load_dataset(manifest, data::CsvOptions{m.history, m.future});
}

const std::vector<data::Scene>& pick(const data::Dataset& ds, const std::string& split) {
  try {
    return ds.split(data::split_from_string(split));
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }
}

// -------------------------------------------------------------------------

int gen_data(const RunConfig& cfg, const fs::path& out_dir, std::ostream& out) {
  std::vector<data::ManifestEntry> entries;
  const std::pair<data::Split, std::size_t> splits[] = {
      {data::Split::train, cfg.data.n_train}, {data::Split::val, cfg.data.n_val}, {data::Split::test, cfg.data.n_test}};
  std::uint64_t offset = 0;
  for (const auto& [split, n] : splits) {
    for (std::size_t i = 0; i < n; ++i) {
      // one index space across splits, so no scene appears twice
      data::Scene s = data::generate_scene(cfg.data.kind, cfg.data.seed, offset + i, cfg.data.synthetic);
      if (split == data::Split::test) s = data::without_future(s);  // like a forecasting test set
      const std::string file = data::to_string(split) + "/" + safe_name(s.name) + ".csv";
      data::write_scene_csv(out_dir / file, s);
      entries.push_back({file, split, data::to_string(cfg.data.kind), s.causal_id.value_or("")});
    }
    offset += n;
  }
  data::write_manifest(out_dir / "manifest.csv", entries);
  write_resolved(out_dir, cfg);
  out << "wrote " << entries.size() << " scenes and " << (out_dir / "manifest.csv").string() << '\n';
  return kExitOk;
}

int train_cmd(RunConfig cfg, const fs::path& manifest, const fs::path& out_dir, std::ostream& out) {
  const data::Dataset ds = load(manifest, cfg.model);
  if (ds.train.empty()) throw DataError("manifest has no train scenes");
  train::TrainConfig tc = cfg.training;
  tc.seed = cfg.seed;
  tc.checkpoint_dir = out_dir / "checkpoints";
  write_resolved(out_dir, cfg);
  std::ofstream log(out_dir / "train_log.jsonl");
  if (!log) throw DataError("cannot write " + (out_dir / "train_log.jsonl").string());
  const auto result = train::train(ds.train, ds.val, cfg.model, tc, [&](const train::EpochLog& e, const model::CratModel&) {
    log << e.to_json() << '\n' << std::flush;
    out << e.to_json() << '\n' << std::flush;
  });
  result.model.save(out_dir / "model.ckpt");
  out << "saved " << (out_dir / "model.ckpt").string() << '\n';
  return kExitOk;
}

int eval_cmd(const RunConfig& cfg, const fs::path& ckpt, const fs::path& manifest, const std::string& split,
             std::size_t k, const fs::path& out_file, std::ostream& out) {
  const model::CratModel m = model::CratModel::load(ckpt);
  const data::Dataset ds = load(manifest, m.config());
  if (k == 0) k = std::min(cfg.eval_k, m.active_modes());
  if (k > m.active_modes())
    throw UsageError("k=" + std::to_string(k) + " exceeds the checkpoint's " + std::to_string(m.active_modes()) +
                     " trained modes");
  const auto report = eval::evaluate(m, pick(ds, split), k, split);
  write_text(out_file, eval::MetricReport::csv_header() + "\n" + report.csv_row() + "\n");
  write_resolved(out_file.has_parent_path() ? out_file.parent_path() : fs::path("."), cfg);
  out << report.to_text() << '\n';
  return kExitOk;
}

int predict_cmd(const RunConfig& cfg, const fs::path& ckpt, const fs::path& manifest, const std::string& split,
                const std::vector<std::string>& scene_files, std::size_t k, const fs::path& out_dir,
                std::ostream& out) {
  const model::CratModel m = model::CratModel::load(ckpt);
  std::vector<data::Scene> scenes;
  if (!manifest.empty()) scenes = pick(load(manifest, m.config()), split);
  for (const auto& f : scene_files) {
    if (!fs::exists(f)) throw DataError("no such scene file: " + f);
    scenes.push_back(data::load_scene_csv(f, data::CsvOptions{m.config().history, m.config().future}));
  }
  if (scenes.empty()) throw UsageError("predict needs --data or --scene");
  if (k == 0) k = m.active_modes();
  if (k > m.active_modes()) throw UsageError("k exceeds the checkpoint's trained modes");
  fs::create_directories(out_dir);
  for (std::size_t start = 0; start < scenes.size(); start += 64) {
    const std::size_t n = std::min<std::size_t>(64, scenes.size() - start);
    const auto preds = m.predict_batch(std::span<const data::Scene>(scenes.data() + start, n));
    for (std::size_t i = 0; i < n; ++i) {
      const auto raw = preds[i].trajectories.raw_modes();
      std::ostringstream csv;
      csv.imbue(std::locale::classic());
      csv << std::setprecision(17) << "mode,step,X,Y\n";
      for (std::size_t mode = 0; mode < k; ++mode)
        for (std::size_t t = 0; t < raw[mode].rows; ++t)
          csv << mode << ',' << t + 1 << ',' << raw[mode](t, 0) << ',' << raw[mode](t, 1) << '\n';
      write_text(out_dir / (safe_name(scenes[start + i].name) + "_pred.csv"), csv.str());
    }
  }
  write_resolved(out_dir, cfg);
  out << "wrote " << scenes.size() << " prediction files to " << out_dir.string() << '\n';
  return kExitOk;
}

int experiment_cmd(const RunConfig& cfg, const fs::path& selector_path, const fs::path& manifest,
                   const fs::path& out_dir, std::ostream& out, std::ostream& err) {
  const model::CratModel selector = model::CratModel::load(selector_path);
  const data::Dataset ds = load(manifest, cfg.experiment.predictor);
  write_resolved(out_dir, cfg);
  const auto table = experiment::run_experiment(ds.train, ds.val, selector, cfg.experiment,
                                                [&](const std::string& s) { err << "[experiment] " << s << '\n'; });
  write_text(out_dir / "selection_table.csv", table.to_csv());
  write_text(out_dir / "selection_deltas.svg", table.bar_chart_svg());
  out << table.to_csv();
  return kExitOk;
}

int plot_cmd(const RunConfig& cfg, const fs::path& ckpt, const fs::path& manifest, const std::string& split,
             const std::vector<std::string>& reports, std::size_t limit, const fs::path& out_dir, std::ostream& out) {
  std::size_t written = 0;
  if (!manifest.empty()) {
    std::optional<model::CratModel> m;
    model::ModelConfig mc = cfg.model;
    if (!ckpt.empty()) {
      m = model::CratModel::load(ckpt);
      mc = m->config();
    }
    auto scenes = pick(load(manifest, mc), split);
    if (scenes.size() > limit) scenes.resize(limit);
    for (const auto& s : scenes) {
      const data::Scene local = data::to_target_frame(s);
      std::vector<Array2> modes;
      if (m) modes = m->predict(data::without_future(s)).trajectories.modes;
      write_text(out_dir / (safe_name(s.name) + ".svg"), viz::scene_svg(local, modes, s.name));
      ++written;
    }
  } else if (!ckpt.empty()) {
    throw UsageError("--checkpoint needs --data to choose scenes");
  }
  if (!reports.empty()) {
    std::vector<std::string> groups{"minADE", "minFDE", "MR"};
    std::vector<viz::BarSeries> series;
    const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"};
    for (const auto& r : reports) {
      std::ifstream in(r);
      if (!in) throw DataError("cannot read report " + r);
      std::string header, row;
      std::getline(in, header);
      if (header != eval::MetricReport::csv_header() || !std::getline(in, row))
        throw DataError(r + ": not a metric report");
      std::vector<std::string> cells;
      std::stringstream ss(row);
      for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
      if (cells.size() != 6) throw DataError(r + ": malformed report row");
      const std::string label = fs::path(r).stem().string() + " (k=" + cells[1] + ")";
      series.push_back({label, colors[series.size() % 6], {std::stod(cells[2]), std::stod(cells[3]), std::stod(cells[4])}});
    }
    write_text(out_dir / "metrics.svg", viz::bar_chart_svg("Displacement metrics", "value", groups, series));
    ++written;
  }
  if (written == 0) throw UsageError("plot needs --data and/or --report");
  write_resolved(out_dir, cfg);
  out << "wrote " << written << " SVG files to " << out_dir.string() << '\n';
  return kExitOk;
}

int param_count(const RunConfig& cfg, std::ostream& out) {
  auto line = [&](const std::string& label, std::size_t v) {
    out << std::left << std::setw(28) << label << std::right << std::setw(10) << grouped(v) << '\n';
  };
  const auto b = model::parameter_breakdown(cfg.model);
  line("input encoder (LSTM)", b.encoder);
  line("graph convolutions + BN", b.gnn);
  line("multi-head self-attention", b.attention);
  line("decoders (" + std::to_string(cfg.model.modes) + " x " + grouped(b.per_decoder) + ")", b.decoders);
  line("total", b.total());
  model::ModelConfig flat = cfg.model;
  flat.use_attention = false;
  line("total without attention", model::parameter_breakdown(flat).total());
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Map-free multi-modal vehicle trajectory prediction"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  Common common;
  std::string out_path, data_path, ckpt, selector;
  std::string eval_split = "val", predict_split = "test", plot_split = "val";
  std::vector<std::string> scene_files, reports;
  std::size_t k = 0, limit = 8;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> kind;
  std::optional<std::size_t> n_train, n_val, n_test;

  auto* gen = app.add_subcommand("gen-data", "Write synthetic scenes as CSV plus a manifest");
  add_common(gen, common);
  gen->add_option("-o,--out", out_path, "Output directory")->required();
  gen->add_option("--kind", kind, "constant-velocity | leader-follower | intersection | bimodal-turn");
  gen->add_option("--seed", seed, "Data seed (data.seed)");
  gen->add_option("--n-train", n_train);
  gen->add_option("--n-val", n_val);
  gen->add_option("--n-test", n_test);

  auto* tr = app.add_subcommand("train", "Run both training stages, writing checkpoints and a JSON-lines log");
  add_common(tr, common);
  tr->add_option("-d,--data", data_path, "Manifest CSV")->required();
  tr->add_option("-o,--out", out_path, "Output directory")->required();
  tr->add_option("--seed", seed, "Initialization and shuffling seed");

  auto* ev = app.add_subcommand("eval", "Score a checkpoint on one split");
  add_common(ev, common);
  ev->add_option("--checkpoint", ckpt)->required();
  ev->add_option("-d,--data", data_path, "Manifest CSV")->required();
  ev->add_option("--split", eval_split, "train | val | test")->capture_default_str();
  ev->add_option("-k", k, "Modes to score (default eval.k, capped at the trained modes)");
  ev->add_option("-o,--out", out_path, "Report CSV")->required();

  auto* pr = app.add_subcommand("predict", "Write k x T_f x 2 trajectories per scene (raw frame)");
  add_common(pr, common);
  pr->add_option("--checkpoint", ckpt)->required();
  pr->add_option("-d,--data", data_path, "Manifest CSV");
  pr->add_option("--split", predict_split, "train | val | test")->capture_default_str();
  pr->add_option("--scene", scene_files, "Scene CSV (repeatable)");
  pr->add_option("-k", k, "Modes to write (default all trained)");
  pr->add_option("-o,--out", out_path, "Output directory")->required();

  auto* ex = app.add_subcommand("select-experiment", "Attention vs Euclidean vehicle selection grid");
  add_common(ex, common);
  ex->add_option("--selector", selector, "Trained checkpoint with attention")->required();
  ex->add_option("-d,--data", data_path, "Manifest CSV (train and val splits)")->required();
  ex->add_option("-o,--out", out_path, "Output directory")->required();

  auto* pl = app.add_subcommand("plot", "Render scenes, predictions and metric bars to SVG");
  add_common(pl, common);
  pl->add_option("--checkpoint", ckpt, "Overlay this model's modes");
  pl->add_option("-d,--data", data_path, "Manifest CSV");
  pl->add_option("--split", plot_split, "train | val | test")->capture_default_str();
  pl->add_option("--limit", limit, "Scenes to render")->capture_default_str();
  pl->add_option("--report", reports, "Metric report CSV from eval (repeatable)");
  pl->add_option("-o,--out", out_path, "Output directory")->required();

  auto* pc = app.add_subcommand("param-count", "Print the learnable parameter breakdown");
  add_common(pc, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    std::vector<std::string> overrides = common.overrides;
    if (seed) overrides.push_back((gen->parsed() ? "data.seed=" : "seed=") + std::to_string(*seed));
    if (kind) overrides.push_back("data.kind=\"" + *kind + "\"");
    if (n_train) overrides.push_back("data.n_train=" + std::to_string(*n_train));
    if (n_val) overrides.push_back("data.n_val=" + std::to_string(*n_val));
    if (n_test) overrides.push_back("data.n_test=" + std::to_string(*n_test));
    const RunConfig cfg = resolve(common.config_file, overrides);

    if (gen->parsed()) return gen_data(cfg, out_path, out);
    if (tr->parsed()) return train_cmd(cfg, data_path, out_path, out);
    if (ev->parsed()) return eval_cmd(cfg, ckpt, data_path, eval_split, k, out_path, out);
    if (pr->parsed()) return predict_cmd(cfg, ckpt, data_path, predict_split, scene_files, k, out_path, out);
    if (ex->parsed()) return experiment_cmd(cfg, selector, data_path, out_path, out, err);
    if (pl->parsed()) return plot_cmd(cfg, ckpt, data_path, plot_split, reports, limit, out_path, out);
    if (pc->parsed()) return param_count(cfg, out);
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
}

}  // namespace crat::cli
