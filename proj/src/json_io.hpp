#pragma once

// JSON mapping of the configuration structs, shared by checkpoints and the
// run config. Reading is strict: unknown keys are a ConfigError, missing keys
// keep their defaults.

#include <nlohmann/json.hpp>
#include <set>
#include <string>

#include "venibot/errors.hpp"
#include "venibot/model.hpp"

namespace venibot::json_io {

using nlohmann::ordered_json;

/// Throws ConfigError when `j` is not an object or has keys outside `allowed`.
inline void check_keys(const ordered_json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

template <typename V>
void read(const ordered_json& j, const char* key, V& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<V>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

inline ordered_json to_json(const model::ArchConfig& a) {
  return ordered_json{{"width_divisor", a.width_divisor},
                      {"cardinality", a.cardinality},
                      {"depths", a.depths},
                      {"height", a.height},
                      {"width", a.width},
                      {"batch_norm", a.batch_norm}};
}

inline model::ArchConfig arch_from_json(const ordered_json& j, const std::string& where = "arch") {
  check_keys(j, where, {"width_divisor", "cardinality", "depths", "height", "width", "batch_norm"});
  model::ArchConfig a;
  read(j, "width_divisor", a.width_divisor, where);
  read(j, "cardinality", a.cardinality, where);
  read(j, "depths", a.depths, where);
  read(j, "height", a.height, where);
  read(j, "width", a.width, where);
  read(j, "batch_norm", a.batch_norm, where);
  a.validate();
  return a;
}

}  // namespace venibot::json_io
