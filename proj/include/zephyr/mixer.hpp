#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "zephyr/coordinator.hpp"
#include "zephyr/crypto/sign.hpp"
#include "zephyr/dht.hpp"
#include "zephyr/envelope.hpp"
#include "zephyr/info_node.hpp"
#include "zephyr/net/rpc.hpp"
#include "zephyr/round_state.hpp"

namespace zephyr::mixer {

using coordinator::RoundReport;

/// Uniform permutation of [0, n): for i = n-1 down to 1, swap(i, j) with j uniform in [0, i].
std::vector<std::size_t> fisher_yates(std::size_t n, crypto::Rng& rng);

/// Reorders `items` so that output[k] = input[perm[k]]; returns perm.
template <typename T>
std::vector<std::size_t> shuffle_batch(std::vector<T>& items, crypto::Rng& rng) {
    auto perm = fisher_yates(items.size(), rng);
    std::vector<T> out;
    out.reserve(items.size());
    for (auto i : perm) out.push_back(std::move(items[i]));
    items = std::move(out);
    return perm;
}

enum class Phase : std::uint8_t { Collecting, Barrier, Mixing, Done };
const char* phase_name(Phase p);

/// Collecting -> Barrier -> Mixing -> Done -> Collecting(next round). Each
/// event is legal in exactly one phase; anything else throws InvariantViolation
/// and leaves the machine unchanged.
class PhaseMachine {
public:
    Phase phase() const { return phase_; }
    std::uint64_t round() const { return round_; }

    void open(std::uint64_t round);  // Done -> Collecting, round must increase
    void close();                    // Collecting -> Barrier
    void begin_mixing();             // Barrier -> Mixing (barrier passed or aborted)
    void finish();                   // Mixing -> Done

private:
    void require(Phase expected, const char* event) const;
    Phase phase_ = Phase::Done;
    std::uint64_t round_ = 0;
};

struct MixerConfig {
    std::vector<std::string> info_nodes;
    net::Duration barrier_poll = net::ms(100);
    net::Duration barrier_timeout = net::seconds(30);
    net::Duration stage_timeout = net::seconds(5);
    net::Duration heartbeat_timeout = net::seconds(2);
    net::Duration call_timeout = net::ms(500);
    std::size_t max_route = 5;
    int publish_attempts = 3;
    /// Test hook: never signal readiness (barrier scenario).
    bool withhold_barrier = false;
    /// Timings the substitute coordinator uses.
    coordinator::Plan substitute_timings;
};

/// Mixnet node: collects onions for the open round, waits on the readytomix
/// barrier, then peels, shuffles and forwards in hop stages. Also the failover
/// substitute when the coordinator goes silent.
class Mixer {
public:
    Mixer(net::Rpc& rpc, dht::Dht& dht, Authority& authority, const crypto::SigningKey& key, MixerConfig config);
    ~Mixer();
    Mixer(const Mixer&) = delete;
    Mixer& operator=(const Mixer&) = delete;

    const NodeId& id() const { return rpc_.self(); }
    Phase phase() const { return machine_.phase(); }
    std::uint64_t round() const { return machine_.round(); }
    const std::map<std::uint64_t, RoundReport>& reports() const { return reports_; }
    std::optional<envelope::KemPublicKey> public_key(std::uint64_t round) const;
    bool substitute() const { return core_ != nullptr; }
    coordinator::CoordinatorCore* core() { return core_.get(); }
    const NodeId& coordinator_id() const { return coordinator_id_; }
    std::size_t batch_size() const;
    std::uint64_t packets_processed() const { return packets_processed_; }
    std::size_t memory_estimate() const;

    /// Crash semantics: drop every key, batch and timer.
    void reset();

private:
    struct RoundData {
        std::uint64_t round = 0;
        net::Time opened_at = 0;
        std::uint32_t stages = 1;
        std::uint32_t stage = 0;
        std::set<crypto::Digest32> seen;
        std::map<std::uint32_t, std::vector<Bytes>> inbox;
        std::map<std::uint32_t, std::set<NodeId>> forward_from;
        RoundReport report;
        std::size_t outstanding = 0;
        bool stages_complete = false;
        bool report_acked = false;
        net::TimerId barrier_deadline = 0;
        net::TimerId stage_timer = 0;
    };

    void handle_submit(const net::Request& req, net::Responder resp);
    void handle_forward(const net::Request& req, net::Responder resp);
    void handle_rotate(const net::Request& req, net::Responder resp);
    void handle_open(const net::Request& req, net::Responder resp);
    void handle_close(const net::Request& req, net::Responder resp);

    void accept_packet(Bytes packet, std::uint32_t stage);
    void publish(const info::MixerKeyRecord& rec, std::vector<std::string> infos, std::size_t tried, int attempt,
                 std::function<void(bool)> done);
    void start_barrier();
    void poll_barrier();
    void abort_round();
    void run_stage(std::uint32_t stage);
    void maybe_advance();
    void settle_one();
    void finish_round();
    void send_report(std::uint64_t round);
    void handle_heartbeat(const net::Request& req);
    void handle_takeover(const net::Request& req, net::Responder resp);
    void handle_recovered(const net::Request& req, net::Responder resp);

    void watch_heartbeat();
    void elect();
    void become_substitute();
    void on_substitute_round_done(std::uint64_t round);

    const RoundState* current_state() const;

    net::Rpc& rpc_;
    dht::Dht& dht_;
    Authority& authority_;
    const crypto::SigningKey& key_;
    MixerConfig config_;
    std::shared_ptr<bool> alive_;

    PhaseMachine machine_;
    std::map<std::uint64_t, envelope::MixerKeyPair> keys_;
    std::unique_ptr<RoundData> data_;
    std::map<std::uint64_t, RoundReport> reports_;
    std::uint64_t packets_processed_ = 0;

    NodeId coordinator_id_;
    std::string coordinator_endpoint_;
    net::Time last_heartbeat_ = 0;
    bool electing_ = false;
    std::unique_ptr<coordinator::CoordinatorCore> core_;
    std::optional<std::pair<NodeId, std::string>> original_;
};

/// SUBMIT payload: u64 round | bytes packet.
Bytes encode_submit(std::uint64_t round, ByteView packet);

}  // namespace zephyr::mixer
