#include "crat/data/csv_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "crat/core/errors.hpp"

namespace crat::data {
namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    if (!field.empty() && field.back() == '\r') field.pop_back();
    out.push_back(field);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& what, const std::string& name) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError(name + ": bad " + what + " value '" + s + "'");
  }
}

struct Row {
  double timestamp;
  std::string track;
  std::string type;
  Vec2 pos;
};

}  // namespace

Scene parse_scene_csv(std::istream& in, const std::string& name, const CsvOptions& options) {
  std::string line;
  if (!std::getline(in, line)) throw DataError(name + ": empty file");
  const auto header = split_csv_line(line);
  auto column = [&](const std::string& col) {
    auto it = std::find(header.begin(), header.end(), col);
    if (it == header.end()) throw DataError(name + ": missing column " + col);
    return std::size_t(it - header.begin());
  };
  const std::size_t c_ts = column("TIMESTAMP"), c_id = column("TRACK_ID"), c_type = column("OBJECT_TYPE"),
                    c_x = column("X"), c_y = column("Y");
  const std::size_t needed = std::max({c_ts, c_id, c_type, c_x, c_y});

  std::vector<Row> rows;
  std::vector<std::string> order;  // first-appearance order of track ids
  std::set<std::string> seen;
  std::set<std::pair<std::string, double>> exact;
  for (std::size_t lineno = 2; std::getline(in, line); ++lineno) {
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() <= needed) throw DataError(name + ": line " + std::to_string(lineno) + " has too few fields");
    Row r{parse_double(f[c_ts], "TIMESTAMP", name), f[c_id], f[c_type],
          {parse_double(f[c_x], "X", name), parse_double(f[c_y], "Y", name)}};
    if (!exact.emplace(r.track, r.timestamp).second) {
      throw DataError(name + ": duplicate row for track " + r.track + " at timestamp " + f[c_ts]);
    }
    if (seen.insert(r.track).second) order.push_back(r.track);
    rows.push_back(std::move(r));
  }

  std::set<std::string> agents;
  for (const Row& r : rows)
    if (r.type == "AGENT") agents.insert(r.track);
  if (agents.empty()) throw DataError(name + ": no AGENT track");
  if (agents.size() > 1) throw DataError(name + ": more than one AGENT track");
  const std::string agent = *agents.begin();

  std::vector<double> agent_ts;
  for (const Row& r : rows)
    if (r.track == agent) agent_ts.push_back(r.timestamp);
  std::sort(agent_ts.begin(), agent_ts.end());
  if (agent_ts.size() < std::size_t(options.history)) {
    throw DataError(name + ": AGENT has " + std::to_string(agent_ts.size()) + " rows, need at least " +
                    std::to_string(options.history));
  }
  const double t0 = agent_ts[std::size_t(options.history - 1)];

  std::map<std::string, std::map<int, Vec2>> by_track;
  for (const Row& r : rows) {
    const int t = int(std::lround((r.timestamp - t0) / options.period_s));
    if (t < -options.history + 1 || t > options.future) continue;
    if (!by_track[r.track].emplace(t, r.pos).second) {
      throw DataError(name + ": track " + r.track + " has two rows in the 0.1 s slot t=" + std::to_string(t));
    }
  }

  Scene scene;
  scene.name = name;
  scene.history = options.history;
  scene.future = options.future;
  auto make_track = [&](const std::string& id, Role role) {
    Track tr{id, role, {}};
    for (const auto& [t, p] : by_track[id]) tr.obs.push_back({t, p});
    return tr;
  };
  scene.tracks.push_back(make_track(agent, Role::target));
  for (const std::string& id : order) {
    if (id == agent) continue;
    Track tr = make_track(id, Role::other);
    if (tr.observed(0)) scene.tracks.push_back(std::move(tr));
  }
  validate(scene);
  return scene;
}

Scene load_scene_csv(const std::filesystem::path& path, const CsvOptions& options) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return parse_scene_csv(in, path.stem().string(), options);
}

void write_scene_csv(const std::filesystem::path& path, const Scene& scene) {
  if (scene.frame != Frame::raw) throw DataError("write_scene_csv expects a raw-frame scene");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  struct Line {
    int t;
    std::size_t track;
    Vec2 pos;
  };
  std::vector<Line> lines;
  for (std::size_t i = 0; i < scene.tracks.size(); ++i)
    for (const auto& o : scene.tracks[i].obs) lines.push_back({o.t, i, o.pos});
  std::stable_sort(lines.begin(), lines.end(), [](const Line& a, const Line& b) { return a.t < b.t; });

  out << "TIMESTAMP,TRACK_ID,OBJECT_TYPE,X,Y\n";
  for (const Line& l : lines) {
    const Track& tr = scene.tracks[l.track];
    const int frame = l.t + scene.history - 1;
    out << (frame < 0 ? "-" : "") << std::abs(frame) / 10 << '.' << std::abs(frame) % 10 << ',' << tr.id << ','
        << (tr.role == Role::target ? "AGENT" : "OTHERS") << ','
        << std::setprecision(std::numeric_limits<double>::max_digits10) << l.pos.x << ',' << l.pos.y << '\n';
  }
  if (!out) throw DataError("failed writing " + path.string());
}

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw DataError("unknown split '" + s + "'");
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << "file,split,scenario,causal_track_id\n";
  for (const auto& e : entries) out << e.file << ',' << to_string(e.split) << ',' << e.scenario << ',' << e.causal_id << '\n';
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  std::string line;
  std::getline(in, line);
  if (split_csv_line(line) != std::vector<std::string>{"file", "split", "scenario", "causal_track_id"}) {
    throw DataError("manifest " + path.string() + ": unexpected header");
  }
  std::vector<ManifestEntry> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != 4) throw DataError("manifest " + path.string() + ": bad line '" + line + "'");
    out.push_back({f[0], split_from_string(f[1]), f[2], f[3]});
  }
  return out;
}

std::vector<Scene>& Dataset::split(Split s) {
  return s == Split::train ? train : s == Split::val ? val : test;
}
const std::vector<Scene>& Dataset::split(Split s) const {
  return s == Split::train ? train : s == Split::val ? val : test;
}

Dataset load_dataset(const std::filesystem::path& manifest, const CsvOptions& options) {
  Dataset ds;
  const auto base = manifest.parent_path();
  for (const auto& e : read_manifest(manifest)) {
    Scene s = load_scene_csv(base / e.file, options);
    if (!e.causal_id.empty()) s.causal_id = e.causal_id;
    ds.split(e.split).push_back(std::move(s));
  }
  return ds;
}

}  // namespace crat::data
