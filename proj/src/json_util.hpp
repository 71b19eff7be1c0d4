#pragma once

#include <set>
#include <string>
#include <string_view>
#include <type_traits>

#include <fmt/format.h>
#include <json.hpp>

#include "arnqs/error.hpp"

namespace arnqs::detail {

template <class T>
bool holds(const nlohmann::json& v)
{
    if constexpr (std::is_same_v<T, bool>) {
        return v.is_boolean();
    } else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) {
        return v.is_number_unsigned();
    } else if constexpr (std::is_integral_v<T>) {
        return v.is_number_integer();
    } else if constexpr (std::is_floating_point_v<T>) {
        return v.is_number();
    } else if constexpr (std::is_same_v<T, std::string>) {
        return v.is_string();
    } else {
        return true;
    }
}

template <class T>
T get_field(const nlohmann::json& j, std::string_view key, std::string_view where)
{
    const std::string k(key);
    if (!j.contains(k)) throw ConfigError(fmt::format("{}.{}: missing", where, key));
    const auto& v = j.at(k);
    if (!holds<T>(v)) throw ConfigError(fmt::format("{}.{}: wrong type", where, key));
    try {
        return v.get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(fmt::format("{}.{}: wrong type", where, key));
    }
}

template <class T>
T get_or(const nlohmann::json& j, std::string_view key, T fallback, std::string_view where)
{
    if (!j.contains(std::string(key))) return fallback;
    return get_field<T>(j, key, where);
}

inline void reject_unknown(const nlohmann::json& j, const std::set<std::string>& allowed, std::string_view where)
{
    for (const auto& item : j.items())
        if (!allowed.contains(item.key())) throw ConfigError(fmt::format("{}.{}: unknown key", where, item.key()));
}

} // namespace arnqs::detail
