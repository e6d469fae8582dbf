#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "zephyr/dht.hpp"
#include "zephyr/envelope.hpp"
#include "zephyr/net/rpc.hpp"
#include "zephyr/round_state.hpp"

namespace zephyr::info {

struct MixerKeyRecord {
    NodeId mixer_id;
    std::uint64_t round = 0;
    envelope::KemPublicKey public_key{};
    envelope::Address address;  // Mixer kind
    std::uint64_t published_at = 0;
    friend bool operator==(const MixerKeyRecord&, const MixerKeyRecord&) = default;
};

Bytes serialize(const MixerKeyRecord& r);
MixerKeyRecord deserialize_record(ByteView b);

/// Everything a client needs for one round: mixer keys sorted by mixer_id,
/// the serialized IBE public parameters, and the signed round state.
struct KeyBundle {
    std::uint64_t round = 0;
    std::vector<MixerKeyRecord> records;
    Bytes mpk;
    RoundState state;
    friend bool operator==(const KeyBundle&, const KeyBundle&) = default;
};

Bytes serialize(const KeyBundle& b);
KeyBundle deserialize_bundle(ByteView b);

/// DHT key under which a mixer key record is replicated.
NodeId record_key(const NodeId& mixer_id, std::uint64_t round);

inline constexpr std::uint64_t kLatestRound = 0;

/// Payload of OPEN_ROUND: signed state followed by the IBE public parameters.
struct OpenRound {
    RoundState state;
    Bytes mpk;
};
Bytes serialize(const OpenRound& o);
OpenRound deserialize_open(ByteView b);

/// Key-distribution node: accepts publications, replicates via the DHT,
/// serves canonical bundles for the current and previous round.
class InfoNode {
public:
    InfoNode(net::Rpc& rpc, dht::Dht& dht, Authority& authority);
    ~InfoNode();
    InfoNode(const InfoNode&) = delete;
    InfoNode& operator=(const InfoNode&) = delete;

    /// Stores locally (replacing any record for the same mixer and round) and replicates.
    void publish_key(const MixerKeyRecord& record);
    void fetch_bundle(std::uint64_t round, std::function<void(Result<KeyBundle>)> done);
    /// Installs the state of a newly opened round.
    bool on_open(const OpenRound& open);
    void reset();
    std::size_t memory_estimate() const;
    std::uint64_t fetches_served() const { return fetches_; }
    std::uint64_t publications() const { return publications_; }

private:
    struct RoundData {
        RoundState state;
        Bytes mpk;
    };
    void handle_fetch(const net::Request& req, net::Responder resp);
    std::optional<KeyBundle> assemble(std::uint64_t round, std::vector<NodeId>* missing) const;

    net::Rpc& rpc_;
    dht::Dht& dht_;
    Authority& authority_;
    std::map<std::uint64_t, RoundData> rounds_;
    std::map<std::pair<std::uint64_t, NodeId>, MixerKeyRecord> records_;
    std::shared_ptr<bool> alive_;
    std::uint64_t fetches_ = 0;
    std::uint64_t publications_ = 0;
};

/// FETCH_BUNDLE request: round (0 = latest) and a "newer than" watermark.
/// The response starts with a status byte: 0 = bundle follows, 1 = nothing newer.
Bytes encode_fetch_request(std::uint64_t round, std::uint64_t newer_than);

}  // namespace zephyr::info
