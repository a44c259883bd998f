#include "radwatch/manifest.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "radwatch/error.hpp"

namespace radwatch {

namespace fs = std::filesystem;

nlohmann::ordered_json manifest_to_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["format"] = "radwatch-manifest";
  j["version"] = 1;
  j["dataset"] = m.dataset;
  j["boards"] = nlohmann::ordered_json::array();
  for (const auto& b : m.boards) j["boards"].push_back({{"id", b.board_id}, {"csv", b.csv_path}, {"meta", b.meta_path}});
  return j;
}

RunManifest manifest_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.value("format", "") != "radwatch-manifest")
    throw Error(ErrorCode::Format, "not a radwatch manifest");
  if (j.value("version", 0) != 1) throw Error(ErrorCode::Format, "unsupported manifest version");
  RunManifest m;
  try {
    m.dataset = j.value("dataset", "");
    std::set<std::string> seen;
    for (const auto& b : j.at("boards")) {
      ManifestEntry e{b.at("id").get<std::string>(), b.at("csv").get<std::string>(), b.at("meta").get<std::string>()};
      if (!seen.insert(e.board_id).second) throw Error(ErrorCode::Format, "duplicate board id " + e.board_id);
      m.boards.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Format, std::string("manifest: ") + e.what());
  }
  return m;
}

RunManifest load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open manifest " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Format, path + ": " + e.what());
  }
  RunManifest m = manifest_from_json(j);
  const fs::path base = fs::path(path).parent_path();
  for (auto& b : m.boards) {
    for (std::string* p : {&b.csv_path, &b.meta_path}) {
      fs::path full(*p);
      if (full.is_relative()) full = base / full;
      if (!fs::exists(full)) throw Error(ErrorCode::Io, b.board_id + ": missing file " + full.string());
      *p = full.string();
    }
  }
  return m;
}

void save_manifest(const RunManifest& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << manifest_to_json(m).dump(2) << '\n';
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

std::vector<BoardRun> load_runs(const RunManifest& m) {
  std::vector<BoardRun> runs;
  for (const auto& b : m.boards) {
    try {
      runs.push_back(load_run(b.csv_path, b.meta_path, b.board_id));
    } catch (const Error& e) {
      throw e.in_context(b.board_id);
    }
  }
  return runs;
}

}  // namespace radwatch
