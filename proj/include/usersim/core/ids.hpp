#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <string>

namespace usersim {

/// Opaque agent handle. Engine iteration order is ascending AgentId.
struct AgentId {
    std::uint32_t value = 0;

    constexpr auto operator<=>(const AgentId&) const = default;
    std::string str() const { return std::to_string(value); }
};

using ItemId = std::string;

}  // namespace usersim

template <>
struct std::hash<usersim::AgentId> {
    std::size_t operator()(const usersim::AgentId& id) const noexcept {
        return std::hash<std::uint32_t>{}(id.value);
    }
};
