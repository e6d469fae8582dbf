#pragma once

#include <compare>
#include <functional>
#include <string>

#include "zephyr/bytes.hpp"

namespace zephyr {

/// 160-bit identifier shared by DHT nodes and keys; ordered as a big-endian integer.
struct NodeId {
    static constexpr std::size_t kBytes = 20;
    static constexpr std::size_t kBits = 160;

    ByteArray<kBytes> bytes{};

    static NodeId from_public_key(ByteView public_key);
    /// hash160 of a label and its parts; used for DHT keys such as readytomix.
    static NodeId of(std::string_view tag, ByteView data);

    bool bit(std::size_t i) const { return (bytes[i / 8] >> (7 - i % 8)) & 1; }
    std::string hex() const { return to_hex(bytes); }
    std::string short_hex() const { return hex().substr(0, 8); }

    auto operator<=>(const NodeId&) const = default;
};

using Distance = NodeId;

inline Distance xor_distance(const NodeId& a, const NodeId& b) {
    Distance d;
    for (std::size_t i = 0; i < NodeId::kBytes; ++i) d.bytes[i] = a.bytes[i] ^ b.bytes[i];
    return d;
}

/// Index of the highest set bit of the distance (0..159), or -1 for zero distance.
int distance_log2(const Distance& d);

}  // namespace zephyr

template <>
struct std::hash<zephyr::NodeId> {
    std::size_t operator()(const zephyr::NodeId& id) const noexcept {
        std::size_t h = 0;
        for (std::size_t i = 0; i < sizeof(std::size_t); ++i) h = (h << 8) | id.bytes[i];
        return h;
    }
};
