#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "zephyr/crypto/hash.hpp"
#include "zephyr/net/rpc.hpp"
#include "zephyr/node_id.hpp"
#include "zephyr/result.hpp"

namespace zephyr::dht {

struct Contact {
    NodeId id;
    std::string endpoint;
    friend bool operator==(const Contact&, const Contact&) = default;
};

struct DhtConfig {
    std::size_t k = 8;
    std::size_t alpha = 3;
    net::Duration rpc_timeout = net::ms(500);
    net::Duration value_ttl = net::seconds(20);
};

inline constexpr std::size_t kMaxValueSize = 4096;

/// 160 k-buckets; bucket i holds contacts at XOR distance in [2^i, 2^(i+1)),
/// least-recently-seen first.
class RoutingTable {
public:
    enum class Update { Inserted, Refreshed, BucketFull, Self };

    RoutingTable(NodeId self, std::size_t k);

    /// Moves a known contact to the tail, inserts a new one if there is room,
    /// or reports BucketFull and leaves the table unchanged.
    Update observe(const Contact& c);
    /// Evicts `stale` from its bucket and appends `fresh` in its place.
    void replace(const NodeId& stale, const Contact& fresh);
    bool remove(const NodeId& id);
    bool contains(const NodeId& id) const;

    std::vector<Contact> closest(const NodeId& target, std::size_t n) const;
    const std::deque<Contact>& bucket(std::size_t i) const { return buckets_[i]; }
    /// Least-recently-seen contact of the bucket `id` would fall into.
    std::optional<Contact> head_for(const NodeId& id) const;
    std::size_t bucket_index(const NodeId& id) const;
    std::size_t size() const;
    const NodeId& self() const { return self_; }
    /// Placement and uniqueness check used by the property tests.
    bool check_invariants() const;

private:
    NodeId self_;
    std::size_t k_;
    std::vector<std::deque<Contact>> buckets_;
};

struct DhtValue {
    NodeId publisher;
    Bytes value;
    net::Time expiry = 0;
};

/// Multi-value store: per key, a set keyed by (publisher, value hash).
class ValueStore {
public:
    /// With `replace`, values previously stored by the same publisher under the key are dropped first.
    void put(const NodeId& key, const NodeId& publisher, Bytes value, net::Time expiry, bool replace);
    /// Live values in canonical order (publisher, value hash).
    std::vector<DhtValue> get(const NodeId& key, net::Time now) const;
    void expire(net::Time now);
    std::size_t key_count() const { return data_.size(); }
    std::size_t byte_size() const;

private:
    std::map<NodeId, std::map<std::pair<NodeId, crypto::Digest32>, DhtValue>> data_;
};

struct LookupResult {
    std::vector<Contact> closest;  // up to k, nearest first; may include self
    std::vector<DhtValue> values;  // union over every responding node (value mode)
    int rounds = 0;                // longest referral chain followed
    int queried = 0;
    int responded = 0;
};

enum class LookupMode { Node, Value };

/// Kademlia node bound to an Rpc endpoint. All entry points run on the
/// runtime's event loop; calls from elsewhere must be posted onto it.
class Dht {
public:
    using LookupCallback = std::function<void(Result<LookupResult>)>;

    Dht(net::Rpc& rpc, DhtConfig config = {});
    ~Dht();

    Contact self() const { return Contact{rpc_.self(), rpc_.runtime().endpoint()}; }
    RoutingTable& table() { return table_; }
    const ValueStore& local_store() const { return store_; }
    const DhtConfig& config() const { return config_; }
    bool joined() const { return joined_; }

    /// Pings every seed endpoint, then looks up its own id.
    void bootstrap(const std::vector<std::string>& seeds, std::function<void(bool)> done);
    void ping(const std::string& endpoint, std::function<void(std::optional<NodeId>)> done);
    void iterative_lookup(const NodeId& target, LookupMode mode, LookupCallback done);
    void find_node(const NodeId& target, LookupCallback done) { iterative_lookup(target, LookupMode::Node, done); }
    void find_value(const NodeId& key, std::function<void(Result<std::vector<DhtValue>>)> done);
    /// Replicates to the k closest nodes; succeeds when at least one stores it.
    void store(const NodeId& key, Bytes value, std::function<void(bool)> done, bool replace = false,
               std::optional<net::Duration> ttl = std::nullopt);

    static NodeId barrier_key(std::uint64_t round);
    void barrier_signal(std::uint64_t round, std::function<void(bool)> done,
                        std::optional<net::Duration> ttl = std::nullopt);
    void barrier_count(std::uint64_t round, std::function<void(Result<std::size_t>)> done);

    /// Clears table, store and in-flight lookups (crash semantics).
    void reset();

private:
    struct Lookup;

    void handle(const net::Request& req, net::Responder resp);
    void observe(const Contact& c);
    void step(const std::shared_ptr<Lookup>& lk);
    Bytes encode_contacts(const std::vector<Contact>& cs) const;

    net::Rpc& rpc_;
    DhtConfig config_;
    RoutingTable table_;
    ValueStore store_;
    bool joined_ = false;
    std::map<NodeId, bool> pinging_;
    std::shared_ptr<bool> alive_;
};

}  // namespace zephyr::dht
