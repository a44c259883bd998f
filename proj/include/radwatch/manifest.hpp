#pragma once

// Run manifests: the list of board runs (CSV + sidecar) that make up a
// dataset, in canonical board order.

#include <string>
#include <vector>

#include "json.hpp"
#include "radwatch/telemetry.hpp"

namespace radwatch {

struct ManifestEntry {
  std::string board_id;
  std::string csv_path;   // relative paths resolve against the manifest file
  std::string meta_path;
};

struct RunManifest {
  std::string dataset;  // version tag, e.g. "simulated/seed-2021"
  std::vector<ManifestEntry> boards;
};

nlohmann::ordered_json manifest_to_json(const RunManifest& m);
// Throws Format on a bad document or duplicate board ids.
RunManifest manifest_from_json(const nlohmann::json& j);

// Reads the manifest and checks every referenced file exists; paths in the
// result are resolved. Throws Io / Format.
RunManifest load_manifest(const std::string& path);
void save_manifest(const RunManifest& m, const std::string& path);

// Loads every run; errors carry the board id.
std::vector<BoardRun> load_runs(const RunManifest& m);

}  // namespace radwatch
