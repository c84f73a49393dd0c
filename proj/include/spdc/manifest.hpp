#pragma once

#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "spdc/common.hpp"
#include "spdc/config.hpp"
#include "spdc/sha256.hpp"
#include "spdc/version.hpp"

namespace spdc {

// Every output file is accompanied by <file>.manifest.json recording the
// command, the fully resolved config, the master seed and the content
// hashes of inputs and outputs: enough to reproduce the file bit-exactly.
struct RunManifest {
  std::string tool = kToolName;
  std::string version = kToolVersion;
  std::string command;
  std::map<std::string, std::string> args;
  KeyValues config;
  std::string config_sha256;
  uint64_t master_seed = 0;
  std::vector<std::pair<std::string, std::string>> inputs;   // path, sha256
  std::vector<std::pair<std::string, std::string>> outputs;  // path, sha256
  std::map<std::string, std::string> notes;
};

inline std::string manifest_path_for(const std::string& data_path) {
  return data_path + ".manifest.json";
}

inline void write_manifest(const std::string& path, const RunManifest& manifest) {
  nlohmann::ordered_json j;
  j["tool"] = manifest.tool;
  j["version"] = manifest.version;
  j["command"] = manifest.command;
  j["args"] = manifest.args;
  j["master_seed"] = manifest.master_seed;
  j["config_sha256"] = manifest.config_sha256;
  j["config"] = manifest.config;
  auto files = nlohmann::ordered_json::array();
  for (const auto& [p, h] : manifest.inputs) files.push_back({{"path", p}, {"sha256", h}});
  j["inputs"] = files;
  files = nlohmann::ordered_json::array();
  for (const auto& [p, h] : manifest.outputs) files.push_back({{"path", p}, {"sha256", h}});
  j["outputs"] = files;
  j["notes"] = manifest.notes;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error(path + ": write failed");
}

inline RunManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open manifest");
  nlohmann::json j;
  in >> j;
  RunManifest m;
  m.tool = j.value("tool", "");
  m.version = j.value("version", "");
  m.command = j.value("command", "");
  if (j.contains("args"))
    for (const auto& [k, v] : j["args"].items()) m.args[k] = v.get<std::string>();
  if (j.contains("config"))
    for (const auto& [k, v] : j["config"].items()) m.config[k] = v.get<std::string>();
  m.config_sha256 = j.value("config_sha256", "");
  m.master_seed = j.value("master_seed", uint64_t(0));
  if (j.contains("inputs"))
    for (const auto& f : j["inputs"]) m.inputs.emplace_back(f.value("path", ""), f.value("sha256", ""));
  if (j.contains("outputs"))
    for (const auto& f : j["outputs"]) m.outputs.emplace_back(f.value("path", ""), f.value("sha256", ""));
  if (j.contains("notes"))
    for (const auto& [k, v] : j["notes"].items()) m.notes[k] = v.get<std::string>();
  return m;
}

}  // namespace spdc
