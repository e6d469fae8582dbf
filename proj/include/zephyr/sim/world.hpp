#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "zephyr/client.hpp"
#include "zephyr/coordinator.hpp"
#include "zephyr/crypto/pairing.hpp"
#include "zephyr/dht.hpp"
#include "zephyr/info_node.hpp"
#include "zephyr/mailbox.hpp"
#include "zephyr/mixer.hpp"
#include "zephyr/net/sim.hpp"
#include "zephyr/pkg.hpp"

namespace zephyr::sim {

enum class FaultKind : std::uint8_t { Crash, Recover, DropRate };

struct FaultEvent {
    net::Time at = 0;   // virtual microseconds from start
    std::string node;   // node name, e.g. "coordinator", "mixer1"
    FaultKind kind = FaultKind::Crash;
    double rate = 0.0;  // DropRate only
};

struct SimConfig {
    std::size_t mixers = 3;
    std::size_t info_nodes = 2;
    std::size_t pkgs = 1;
    std::size_t mailboxes = 4;  // mailbox servers
    std::uint32_t mailbox_count = 16;
    std::size_t clients = 10;
    std::size_t rounds = 3;
    std::uint64_t seed = 42;
    std::size_t messages_per_client = 7;
    net::Duration round_duration = net::seconds(10);
    std::vector<FaultEvent> fault_plan;
    /// Mixers (by index) that never signal the barrier.
    std::vector<std::size_t> withhold_barrier;

    /// Throws ConfigInvalid.
    void validate() const;
};

SimConfig parse_config(const std::string& json_text);
SimConfig load_config(const std::filesystem::path& path);

struct TraceEvent {
    std::uint64_t index = 0;
    net::Time at = 0;
    std::string node;
    std::string event;
};

/// One simulated host: runtime, RPC, and whichever services its role runs.
struct SimNode {
    std::string name;
    std::string role;
    std::string endpoint;
    net::SimRuntime* rt = nullptr;
    std::unique_ptr<crypto::SigningKey> key;
    std::unique_ptr<net::Rpc> rpc;
    std::unique_ptr<dht::Dht> dht;
    std::unique_ptr<Authority> authority;

    std::unique_ptr<coordinator::Coordinator> coordinator;
    std::unique_ptr<mixer::Mixer> mixer;
    std::unique_ptr<info::InfoNode> info;
    std::unique_ptr<pkg::PkgCore> pkg_core;
    std::unique_ptr<pkg::PkgServer> pkg;
    std::unique_ptr<mailbox::MemoryStore> store;
    std::unique_ptr<mailbox::MailboxServer> mailbox;
    std::unique_ptr<client::Client> client;

    const NodeId& id() const { return rpc->self(); }
    std::uint64_t messages_processed() const;
    std::size_t memory_estimate() const;
};

struct MetricsRow {
    std::string node_role;
    std::string node_id;
    std::uint64_t round = 0;
    std::uint64_t bytes_received = 0;
    std::uint64_t bytes_sent = 0;
    std::uint64_t messages_processed = 0;
    std::uint64_t resident_set_estimate = 0;
};

std::string csv_header();
std::string to_csv(const std::vector<MetricsRow>& rows);

struct DeliveryStats {
    std::uint64_t expected = 0;
    std::uint64_t submitted = 0;
    std::uint64_t delivered = 0;      // to the intended recipient, once
    std::uint64_t misdelivered = 0;   // opened by someone other than the recipient
    std::uint64_t duplicated = 0;
    std::uint64_t missing = 0;
};

/// A whole network on one virtual clock. Node code is the same as in the
/// live daemons; only the runtime differs.
class World {
public:
    explicit World(SimConfig config);
    ~World();
    World(const World&) = delete;
    World& operator=(const World&) = delete;

    /// Joins the overlay, starts the coordinator and the clients, arms faults.
    void start();
    bool run_until(const std::function<bool()>& done, net::Time deadline) { return net_.run_until(done, deadline); }
    void run_for(net::Duration d) { net_.run_for(d); }
    net::Time now() const { return net_.now(); }

    net::SimNetwork& network() { return net_; }
    const SimConfig& config() const { return config_; }
    SimNode& node(const std::string& name);
    SimNode& coordinator() { return node("coordinator"); }
    std::vector<SimNode*> role(const std::string& role);
    const std::vector<std::unique_ptr<SimNode>>& nodes() const { return nodes_; }
    pkg::InMemoryEmail& email() { return email_; }

    void crash(const std::string& name);
    void recover(const std::string& name);

    const std::vector<TraceEvent>& trace() const { return trace_; }
    std::function<void(const TraceEvent&)> on_event;
    /// Rounds opened so far (any coordinator).
    std::uint64_t rounds_opened() const { return rounds_opened_; }
    /// Number of clients that have fetched their mailbox for `round`.
    std::size_t fetched(std::uint64_t round) const;
    DeliveryStats delivery() const;
    const std::vector<MetricsRow>& metrics() const { return metrics_; }

private:
    SimNode& add(const std::string& name, const std::string& role);
    void build();
    void wire_crash(SimNode& n);
    void snapshot(std::uint64_t round);
    void on_trace(net::Time at, const std::string& endpoint, std::string_view event);
    void client_enrolled(std::size_t index, std::uint64_t round);

    SimConfig config_;
    net::SimNetwork net_;
    crypto::DeterministicRng rng_;
    pkg::InMemoryEmail email_;
    coordinator::Plan plan_;
    std::vector<std::unique_ptr<SimNode>> nodes_;
    std::map<std::string, SimNode*> by_name_;
    std::map<std::string, SimNode*> by_endpoint_;
    std::vector<std::string> dht_seeds_;

    std::vector<TraceEvent> trace_;
    std::uint64_t rounds_opened_ = 0;
    std::uint64_t last_snapshot_round_ = 0;
    struct Counters {
        std::uint64_t received = 0, sent = 0, processed = 0;
    };
    std::map<std::string, Counters> last_;
    std::vector<MetricsRow> metrics_;

    std::map<std::string, std::string> expected_;  // message text -> recipient identity
    std::map<std::string, std::uint64_t> received_;  // "identity|text" -> count
    std::uint64_t misdelivered_ = 0;
    std::map<std::uint64_t, std::size_t> fetched_;
};

struct SimReport {
    std::vector<MetricsRow> rows;
    DeliveryStats delivery;
    std::uint64_t rounds_completed = 0;
    std::vector<std::string> violations;
    std::string summary;
    bool ok() const { return violations.empty(); }
};

/// Full lifecycle for config.rounds rounds (plus one opening so the last
/// round's mail is fetched).
SimReport run_sim(const SimConfig& config);

/// Safety checks over a trace: at most one coordinator acts per (round, phase).
std::vector<std::string> check_single_actor(const std::vector<TraceEvent>& trace);

}  // namespace zephyr::sim
