#include "zephyr/node_id.hpp"

#include "zephyr/crypto/hash.hpp"

namespace zephyr {

NodeId NodeId::from_public_key(ByteView public_key) {
    return NodeId{crypto::hash160("zephyr-node-id", {public_key})};
}

NodeId NodeId::of(std::string_view tag, ByteView data) { return NodeId{crypto::hash160(tag, {data})}; }

int distance_log2(const Distance& d) {
    for (std::size_t i = 0; i < NodeId::kBytes; ++i) {
        if (d.bytes[i] == 0) continue;
        int bit = 7;
        while (!((d.bytes[i] >> bit) & 1)) --bit;
        return static_cast<int>((NodeId::kBytes - 1 - i) * 8) + bit;
    }
    return -1;
}

}  // namespace zephyr
