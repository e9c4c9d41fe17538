#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "sdof/ids.hpp"

namespace sdof {

using Json = nlohmann::json;

template <class Tag>
void to_json(Json& j, const Name<Tag>& n) {
  j = n.str();
}

template <class Tag>
void from_json(const Json& j, Name<Tag>& n) {
  n = Name<Tag>(j.get<std::string>());
}

namespace json_util {

/// Throws ConfigError naming the first key of `obj` not in `allowed`.
inline void reject_unknown_keys(const Json& obj, std::initializer_list<std::string_view> allowed,
                                std::string_view where) {
  if (!obj.is_object()) {
    throw ConfigError(std::string(where) + ": expected a JSON object");
  }
  for (const auto& [key, _] : obj.items()) {
    bool known = false;
    for (auto a : allowed) {
      if (a == key) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw ConfigError(std::string(where) + ": unknown key '" + key + "'");
    }
  }
}

inline const Json& require(const Json& obj, const char* key, std::string_view where) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw ConfigError(std::string(where) + ": missing key '" + key + "'");
  }
  return *it;
}

inline Json read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw StorageError("cannot open " + path);
  }
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline void write_file(const std::string& path, const Json& value, int indent = 2) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw StorageError("cannot write " + path);
  }
  out << value.dump(indent) << '\n';
  if (!out) {
    throw StorageError("write failed: " + path);
  }
}

/// FNV-1a 64 over the canonical (sorted-key, compact) serialization.
inline std::string digest(const Json& value) {
  const std::string canonical = value.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace json_util
}  // namespace sdof
