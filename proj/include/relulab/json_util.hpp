#pragma once

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "relulab/errors.hpp"

// Strict readers for config blocks: every failure names the JSON path.
namespace relulab::json_util {

using nlohmann::json;

inline std::string child(const std::string& path, std::string_view key) {
    return path + "." + std::string(key);
}

inline std::string child(const std::string& path, std::size_t index) {
    return path + "[" + std::to_string(index) + "]";
}

inline void require_object(const json& j, const std::string& path) {
    if (!j.is_object()) {
        throw ConfigError(path, "expected an object");
    }
}

inline void allow_keys(const json& j, const std::string& path, std::initializer_list<std::string_view> allowed) {
    require_object(j, path);
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (auto a : allowed) {
            known = known || key == a;
        }
        if (!known) {
            throw ConfigError(child(path, key), "unknown key");
        }
    }
}

inline const json& required(const json& j, const std::string& path, std::string_view key) {
    require_object(j, path);
    auto it = j.find(std::string(key));
    if (it == j.end()) {
        throw ConfigError(child(path, key), "missing required key");
    }
    return *it;
}

inline double as_number(const json& j, const std::string& path) {
    if (!j.is_number()) {
        throw ConfigError(path, "expected a number");
    }
    return j.get<double>();
}

inline std::int64_t as_integer(const json& j, const std::string& path) {
    if (!j.is_number_integer()) {
        throw ConfigError(path, "expected an integer");
    }
    return j.get<std::int64_t>();
}

inline std::uint64_t as_unsigned(const json& j, const std::string& path) {
    if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() && j.get<std::int64_t>() < 0)) {
        throw ConfigError(path, "expected a non-negative integer");
    }
    return j.get<std::uint64_t>();
}

inline std::string as_string(const json& j, const std::string& path) {
    if (!j.is_string()) {
        throw ConfigError(path, "expected a string");
    }
    return j.get<std::string>();
}

inline bool as_bool(const json& j, const std::string& path) {
    if (!j.is_boolean()) {
        throw ConfigError(path, "expected a boolean");
    }
    return j.get<bool>();
}

inline std::vector<double> as_number_array(const json& j, const std::string& path) {
    if (!j.is_array()) {
        throw ConfigError(path, "expected an array");
    }
    std::vector<double> out;
    out.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        out.push_back(as_number(j[i], child(path, i)));
    }
    return out;
}

inline double number_or(const json& j, const std::string& path, std::string_view key, double fallback) {
    auto it = j.find(std::string(key));
    return it == j.end() ? fallback : as_number(*it, child(path, key));
}

inline std::uint64_t unsigned_or(const json& j, const std::string& path, std::string_view key, std::uint64_t fallback) {
    auto it = j.find(std::string(key));
    return it == j.end() ? fallback : as_unsigned(*it, child(path, key));
}

inline std::string string_or(const json& j, const std::string& path, std::string_view key, std::string fallback) {
    auto it = j.find(std::string(key));
    return it == j.end() ? fallback : as_string(*it, child(path, key));
}

inline bool bool_or(const json& j, const std::string& path, std::string_view key, bool fallback) {
    auto it = j.find(std::string(key));
    return it == j.end() ? fallback : as_bool(*it, child(path, key));
}

} // namespace relulab::json_util
