// Strict JSON object parsing helpers: unknown keys are rejected.
#pragma once

#include <initializer_list>
#include <string>

#include <json.hpp>

#include "mmbal/common.hpp"

namespace mmbal {

inline void expect_keys(const nlohmann::json& j, const std::string& where,
                        std::initializer_list<const char*> allowed) {
    check_config(j.is_object(), where + ": expected a JSON object");
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* key : allowed) {
            if (item.key() == key) {
                known = true;
                break;
            }
        }
        check_config(known, where + ": unknown key \"" + item.key() + "\"");
    }
}

template <typename T>
T require(const nlohmann::json& j, const std::string& where, const char* key) {
    check_config(j.contains(key), where + ": missing key \"" + key + "\"");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw config_error(where + ": bad value for \"" + std::string(key) + "\": " + e.what());
    }
}

template <typename T>
T optional_or(const nlohmann::json& j, const std::string& where, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw config_error(where + ": bad value for \"" + std::string(key) + "\": " + e.what());
    }
}

}  // namespace mmbal
