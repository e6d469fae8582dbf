#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "zephyr/crypto/sign.hpp"
#include "zephyr/dht.hpp"
#include "zephyr/net/rpc.hpp"
#include "zephyr/round_state.hpp"

namespace zephyr::coordinator {

/// Per-round counts a mixer returns with REPORT_DONE.
/// received = dropped + forwarded + uploaded; duplicates are not part of received.
struct RoundReport {
    std::uint64_t round = 0;
    bool aborted = false;
    std::uint64_t received = 0;
    std::uint64_t peeled = 0;
    std::uint64_t dropped = 0;
    std::uint64_t forwarded = 0;
    std::uint64_t uploaded = 0;
    std::uint64_t duplicates = 0;
    std::uint64_t malformed = 0;

    bool conserved() const { return received == dropped + forwarded + uploaded; }
    friend bool operator==(const RoundReport&, const RoundReport&) = default;
};

Bytes serialize(const RoundReport& r);
RoundReport deserialize_report(ByteView b);

/// Everything the coordinator needs to build a directory, other than the mixers
/// that answer the rotation call.
struct Plan {
    std::vector<std::string> mixer_endpoints;
    std::vector<std::string> info_nodes;
    std::vector<std::string> mailbox_servers;
    std::string pkg_endpoint;
    std::uint32_t mailbox_count = 16;
    ByteArray<32> salt{};
    net::Duration round_duration = net::seconds(10);
    net::Duration rotate_timeout = net::seconds(5);
    net::Duration report_timeout = net::seconds(90);
    net::Duration call_timeout = net::ms(500);
    net::Duration retry_delay = net::seconds(1);
};

/// Plan that keeps the membership and services of an accepted round (substitute use).
Plan plan_from_state(const RoundState& s, const Plan& timings);

/// DHT key of the published RoundState.
NodeId round_state_key(std::uint64_t round);

/// Round lifecycle state machine: rotate -> open -> close -> collect reports.
/// Driven by one event queue (the node's runtime); the original coordinator and
/// a failover substitute run the same code. Sends HEARTBEAT while it exists.
class CoordinatorCore {
public:
    /// Invoked when every report for `round` is in (or the report timeout fired).
    using RoundDone = std::function<void(std::uint64_t round)>;

    CoordinatorCore(net::Rpc& rpc, dht::Dht* dht, const crypto::SigningKey& key, Plan plan);
    ~CoordinatorCore();
    CoordinatorCore(const CoordinatorCore&) = delete;
    CoordinatorCore& operator=(const CoordinatorCore&) = delete;

    /// Rotates keys for `round`, then opens it.
    void prepare(std::uint64_t round);
    /// Takes over an open round. `closed` tells whether CLOSE already went out;
    /// otherwise CLOSE is sent at `close_at`.
    void resume(const RoundState& state, bool closed, net::Time close_at);
    void on_report(const NodeId& mixer, const RoundReport& report);
    void stop();

    RoundDone on_round_done;
    std::function<void(const RoundState&)> on_open;

    std::uint64_t round() const { return round_; }
    RoundPhase phase() const { return phase_; }
    const std::optional<RoundState>& state() const { return state_; }
    const std::map<NodeId, RoundReport>& reports() const { return reports_; }
    const crypto::MasterPublicKey* mpk() const { return mpk_ ? &*mpk_ : nullptr; }
    const Plan& plan() const { return plan_; }
    /// Endpoints that missed the last rotation or report deadline.
    const std::vector<std::string>& laggards() const { return laggards_; }

private:
    void act(std::uint64_t round, RoundPhase phase);
    void rotate_master(std::uint64_t round);
    void rotate_mixers(std::uint64_t round);
    void open(std::uint64_t round);
    void close();
    void finish_round();
    void heartbeat();
    void call_with_retry(const std::string& endpoint, net::Opcode op, Bytes payload, int attempts,
                         std::function<void(net::Response)> done);

    net::Rpc& rpc_;
    dht::Dht* dht_;
    const crypto::SigningKey& key_;
    Plan plan_;
    std::shared_ptr<bool> alive_;

    std::uint64_t round_ = 0;
    RoundPhase phase_ = RoundPhase::Rotating;
    std::optional<RoundState> state_;
    Bytes mpk_bytes_;
    std::optional<crypto::MasterPublicKey> mpk_;
    std::vector<MixerEntry> rotated_;
    std::map<NodeId, RoundReport> reports_;
    std::vector<std::string> laggards_;
    net::TimerId close_timer_ = 0;
    net::TimerId report_timer_ = 0;
    net::TimerId heartbeat_timer_ = 0;
    bool done_fired_ = false;
};

/// Long-lived coordinator daemon holding the pinned key. After a crash it
/// announces RECOVERED to the mixers and waits for HANDBACK from a substitute.
class Coordinator {
public:
    Coordinator(net::Rpc& rpc, dht::Dht* dht, const crypto::SigningKey& key, Plan plan);
    ~Coordinator();

    void start(std::uint64_t first_round = 1);
    /// Crash semantics: drop all state.
    void reset();
    /// Restarted after a crash.
    void recover();

    bool active() const { return core_ != nullptr; }
    CoordinatorCore* core() { return core_.get(); }
    std::size_t memory_estimate() const;
    std::uint64_t reports_received() const { return reports_received_; }

private:
    void activate(std::uint64_t round);
    void announce_recovery();

    net::Rpc& rpc_;
    dht::Dht* dht_;
    const crypto::SigningKey& key_;
    Plan plan_;
    std::unique_ptr<CoordinatorCore> core_;
    std::shared_ptr<bool> alive_;
    bool recovering_ = false;
    int empty_recovery_polls_ = 0;
    std::uint64_t reports_received_ = 0;
};

/// HEARTBEAT payload: SignedCommand("heartbeat", round, issuer).
Bytes make_heartbeat(std::uint64_t round, const NodeId& issuer, const crypto::SigningKey& key);

inline constexpr net::Duration kHeartbeatInterval = net::ms(500);

}  // namespace zephyr::coordinator
