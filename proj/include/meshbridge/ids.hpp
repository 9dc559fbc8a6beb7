#pragma once

#include <compare>
#include <cstdint>
#include <string>

#include "meshbridge/graph.hpp"

namespace meshbridge {

// One search, unique per (initiator, per-initiator counter).
struct ExplorerId {
    NodeId initiator = 0;
    std::uint32_t sequence = 0;

    std::uint64_t key() const { return (static_cast<std::uint64_t>(initiator) << 32) | sequence; }
    static ExplorerId from_key(std::uint64_t key) {
        return {static_cast<NodeId>(key >> 32), static_cast<std::uint32_t>(key & 0xffffffffu)};
    }
    auto operator<=>(const ExplorerId&) const = default;
};

inline std::string to_string(const ExplorerId& id) {
    return std::to_string(id.initiator) + ":" + std::to_string(id.sequence);
}

}  // namespace meshbridge
