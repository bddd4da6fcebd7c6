#pragma once

#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <ctime>
#include <optional>
#include <string>
#include <vector>

#include "isac/csv.hpp"
#include "isac/dp.hpp"
#include "isac/errors.hpp"
#include "isac/scenario.hpp"
#include "isac/version.hpp"

namespace isac {

// Provenance record written next to every command's outputs. The timestamp is
// the only field that varies between reruns of the same command.
struct RunManifest {
  std::string command;
  std::string scenario_digest;
  std::optional<GridSpec> grid;
  std::uint64_t seed = 0;
  std::string tool_version = kVersion;
  std::string created_utc;
  std::vector<std::string> outputs;
  nlohmann::json parameters = nlohmann::json::object();
};

inline std::string utc_timestamp_now() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline nlohmann::json grid_to_json(const GridSpec& spec) {
  return {{"p_min", spec.p_min},   {"p_max", spec.p_max},
          {"q_min", spec.q_min},   {"q_max", spec.q_max},
          {"points_p", spec.points_p}, {"points_q", spec.points_q}};
}

inline GridSpec grid_from_json(const nlohmann::json& j) {
  GridSpec spec;
  try {
    spec.p_min = j.at("p_min").get<double>();
    spec.p_max = j.at("p_max").get<double>();
    spec.q_min = j.at("q_min").get<double>();
    spec.q_max = j.at("q_max").get<double>();
    spec.points_p = j.at("points_p").get<int>();
    spec.points_q = j.at("points_q").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("grid specification: ") + e.what());
  }
  return spec;
}

inline nlohmann::json manifest_to_json(const RunManifest& m) {
  nlohmann::json j;
  j["command"] = m.command;
  j["scenario_digest"] = m.scenario_digest;
  if (m.grid.has_value()) j["grid"] = grid_to_json(*m.grid);
  j["seed"] = m.seed;
  j["tool_version"] = m.tool_version;
  j["created_utc"] = m.created_utc;
  j["outputs"] = m.outputs;
  j["parameters"] = m.parameters;
  return j;
}

inline RunManifest manifest_from_json(const nlohmann::json& j) {
  RunManifest m;
  try {
    m.command = j.at("command").get<std::string>();
    m.scenario_digest = j.at("scenario_digest").get<std::string>();
    if (j.contains("grid")) m.grid = grid_from_json(j.at("grid"));
    m.seed = j.at("seed").get<std::uint64_t>();
    m.tool_version = j.at("tool_version").get<std::string>();
    m.created_utc = j.at("created_utc").get<std::string>();
    m.outputs = j.at("outputs").get<std::vector<std::string>>();
    if (j.contains("parameters")) m.parameters = j.at("parameters");
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("run manifest: ") + e.what());
  }
  return m;
}

inline void save_manifest(const std::string& path, const RunManifest& m) {
  write_text_file(path, manifest_to_json(m).dump(2) + "\n");
}

inline RunManifest load_manifest(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("run manifest " + path + " is not valid JSON: " +
                     e.what());
  }
  return manifest_from_json(j);
}

}  // namespace isac
