#pragma once

// Strict readers for user-facing config files. Problems raise ConfigError.

#include <initializer_list>
#include <string>

#include "evdeblur/errors.hpp"
#include "evdeblur/io.hpp"

namespace evdeblur::config_json {

inline void check_keys(const Json& j, std::initializer_list<const char*> known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* name : known) ok = ok || k == name;
    if (!ok) throw ConfigError(where + ": unknown key '" + k + "'");
  }
}

/// Leaves `out` untouched when the key is absent or null.
template <typename T>
void read_key(const Json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + ": key '" + key + "' has the wrong type");
  }
}

}  // namespace evdeblur::config_json
