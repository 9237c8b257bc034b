#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "crat/data/scene.hpp"

namespace crat::data {

struct CsvOptions {
  int history = 20;
  int future = 30;
  double period_s = 0.1;
};

/// Reads an Argoverse-style sequence (columns TIMESTAMP, TRACK_ID,
/// OBJECT_TYPE, X, Y located by header name; extra columns ignored). The
/// AGENT track's T_h-th timestamp defines t = 0; every row is snapped to the
/// nearest 0.1 s slot. Tracks unobserved at t = 0 are dropped. Throws
/// DataError on a missing/duplicate AGENT, duplicate or colliding rows, or
/// an incomplete target history.
Scene load_scene_csv(const std::filesystem::path& path, const CsvOptions& options = {});
Scene parse_scene_csv(std::istream& in, const std::string& name, const CsvOptions& options = {});

/// Writes a raw-frame scene in the same layout (timestamps (t + T_h − 1)·0.1 s,
/// positions at full double precision).
void write_scene_csv(const std::filesystem::path& path, const Scene& scene);

enum class Split { train, val, test };
std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct ManifestEntry {
  std::string file;  // relative to the manifest's directory
  Split split = Split::train;
  std::string scenario;
  std::string causal_id;  // empty when unlabeled
};

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

struct Dataset {
  std::vector<Scene> train;
  std::vector<Scene> val;
  std::vector<Scene> test;

  std::vector<Scene>& split(Split s);
  const std::vector<Scene>& split(Split s) const;
};

/// Loads every manifest entry (raw frame) with causal labels attached, in
/// manifest order.
Dataset load_dataset(const std::filesystem::path& manifest, const CsvOptions& options = {});

}  // namespace crat::data
