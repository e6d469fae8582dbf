#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>

#include "zephyr/dht.hpp"
#include "zephyr/net/sim.hpp"

using namespace zephyr;
using namespace zephyr::dht;
using namespace zephyr::net;

namespace {

NodeId random_id(crypto::Rng& rng) {
    NodeId id;
    rng.fill(id.bytes);
    return id;
}

struct Cluster {
    SimNetwork net;
    struct Node {
        std::unique_ptr<Rpc> rpc;
        std::unique_ptr<Dht> dht;
        std::string endpoint;
    };
    std::vector<Node> nodes;

    Cluster(std::size_t n, std::uint64_t seed, DhtConfig cfg = {}) : net(seed) {
        for (std::size_t i = 0; i < n; ++i) {
            const std::string ep = "dht" + std::to_string(i) + ":4000";
            auto& rt = net.add_node(ep);
            Node node;
            node.endpoint = ep;
            node.rpc = std::make_unique<Rpc>(rt, NodeId::of("dht-test", as_bytes(ep)));
            node.dht = std::make_unique<Dht>(*node.rpc, cfg);
            nodes.push_back(std::move(node));
        }
        for (std::size_t i = 0; i < n; ++i) {
            bool done = false;
            nodes[i].dht->bootstrap({nodes[0].endpoint}, [&](bool) { done = true; });
            net.run_until([&] { return done; }, net.now() + seconds(10));
        }
        // second pass so early joiners learn about later ones
        for (std::size_t i = 0; i < n; ++i) {
            bool done = false;
            nodes[i].dht->find_node(nodes[i].rpc->self(), [&](Result<LookupResult>) { done = true; });
            net.run_until([&] { return done; }, net.now() + seconds(10));
        }
    }

    bool store(std::size_t via, const NodeId& key, Bytes value) {
        std::optional<bool> ok;
        nodes[via].dht->store(key, std::move(value), [&](bool r) { ok = r; });
        net.run_until([&] { return ok.has_value(); }, net.now() + seconds(30));
        return ok.value_or(false);
    }

    Result<std::vector<DhtValue>> find(std::size_t via, const NodeId& key) {
        std::optional<Result<std::vector<DhtValue>>> out;
        nodes[via].dht->find_value(key, [&](Result<std::vector<DhtValue>> r) { out = std::move(r); });
        net.run_until([&] { return out.has_value(); }, net.now() + seconds(30));
        EXPECT_TRUE(out.has_value()) << "lookup did not terminate";
        return out.value_or(Result<std::vector<DhtValue>>{});
    }
};

}  // namespace

TEST(XorMetric, Laws) {
    crypto::DeterministicRng rng(1, "xor");
    for (int i = 0; i < 1000; ++i) {
        const NodeId a = random_id(rng), b = random_id(rng), c = random_id(rng);
        EXPECT_EQ(xor_distance(a, a), NodeId{});
        EXPECT_EQ(xor_distance(a, b), xor_distance(b, a));
        EXPECT_EQ(xor_distance(xor_distance(a, b), xor_distance(b, c)), xor_distance(a, c));
        if (a != b) EXPECT_NE(xor_distance(a, b), NodeId{});
    }
}

TEST(XorMetric, ToyPrefix) {
    NodeId a, b;
    a.bytes[0] = 0b10100000;
    b.bytes[0] = 0b01100000;
    EXPECT_EQ(xor_distance(a, b).bytes[0] >> 4, 0b1100);
    EXPECT_EQ(distance_log2(xor_distance(a, b)), 159);
    EXPECT_EQ(distance_log2(NodeId{}), -1);
}

TEST(RoutingTable, PlacementHoldsAfterEveryMutation) {
    crypto::DeterministicRng rng(2, "rt");
    const NodeId self = random_id(rng);
    RoutingTable t(self, 4);
    std::vector<NodeId> ids;
    for (int i = 0; i < 2000; ++i) {
        const auto op = rng.uniform(10);
        if (op < 6 || ids.empty()) {
            NodeId id = random_id(rng);
            // bias toward near buckets so they fill up
            std::memcpy(id.bytes.data(), self.bytes.data(), rng.uniform(4));
            t.observe(Contact{id, "x:1"});
            ids.push_back(id);
        } else if (op < 8) {
            t.remove(ids[rng.uniform(ids.size())]);
        } else {
            t.observe(Contact{ids[rng.uniform(ids.size())], "x:1"});
        }
        ASSERT_TRUE(t.check_invariants()) << "after op " << i;
    }
    EXPECT_EQ(t.observe(Contact{self, "x:1"}), RoutingTable::Update::Self);
}

TEST(RoutingTable, LeastRecentlySeenFirstAndFullBucket) {
    NodeId self;
    RoutingTable t(self, 2);
    NodeId a, b;
    a.bytes[19] = 2;
    b.bytes[19] = 3;
    EXPECT_EQ(t.observe({a, "a:1"}), RoutingTable::Update::Inserted);
    EXPECT_EQ(t.observe({b, "b:1"}), RoutingTable::Update::Inserted);
    EXPECT_EQ(t.bucket(1).front().id, a);
    EXPECT_EQ(t.observe({a, "a:1"}), RoutingTable::Update::Refreshed);
    EXPECT_EQ(t.bucket(1).front().id, b);
    NodeId f, g, h;
    f.bytes[19] = 4;
    g.bytes[19] = 5;
    h.bytes[19] = 6;
    t.observe({f, "f:1"});
    t.observe({g, "g:1"});
    EXPECT_EQ(t.observe({h, "h:1"}), RoutingTable::Update::BucketFull);
    EXPECT_EQ(t.head_for(h)->id, f);
    t.replace(f, {h, "h:1"});
    EXPECT_FALSE(t.contains(f));
    EXPECT_TRUE(t.contains(h));
    EXPECT_TRUE(t.check_invariants());
}

TEST(ValueStore, SetSemanticsTtlAndReplace) {
    ValueStore s;
    NodeId k, p1, p2;
    p1.bytes[0] = 1;
    p2.bytes[0] = 2;
    s.put(k, p1, to_bytes("a"), 100, false);
    s.put(k, p1, to_bytes("a"), 100, false);
    s.put(k, p2, to_bytes("a"), 50, false);
    s.put(k, p1, to_bytes("b"), 100, false);
    EXPECT_EQ(s.get(k, 0).size(), 3u);
    EXPECT_EQ(s.get(k, 60).size(), 2u);
    s.put(k, p1, to_bytes("c"), 100, true);
    const auto vals = s.get(k, 60);
    ASSERT_EQ(vals.size(), 1u);
    EXPECT_EQ(vals[0].value, to_bytes("c"));
    s.expire(200);
    EXPECT_EQ(s.key_count(), 0u);
}

TEST(Dht, SingleNodeStoreThenFind) {
    Cluster c(1, 1);
    const NodeId key = NodeId::of("k", as_bytes("1"));
    ASSERT_TRUE(c.store(0, key, to_bytes("v")));
    auto r = c.find(0, key);
    ASSERT_TRUE(r.ok());
    ASSERT_EQ(r.value->size(), 1u);
    EXPECT_EQ((*r.value)[0].value, to_bytes("v"));
}

TEST(Dht, LookupOfSelfReturnsSelfAmongClosest) {
    Cluster c(6, 2);
    std::optional<Result<LookupResult>> r;
    c.nodes[3].dht->find_node(c.nodes[3].rpc->self(), [&](Result<LookupResult> x) { r = std::move(x); });
    c.net.run_until([&] { return r.has_value(); }, c.net.now() + seconds(10));
    ASSERT_TRUE(r && r->ok());
    EXPECT_EQ(r->value->closest.front().id, c.nodes[3].rpc->self());
}

TEST(Dht, EmptyTableLookupTerminates) {
    SimNetwork net(1);
    auto& rt = net.add_node("solo:1");
    Rpc rpc(rt, NodeId::of("solo", {}));
    Dht dht(rpc);
    bool done = false;
    dht.find_node(NodeId::of("x", {}), [&](Result<LookupResult> r) {
        done = true;
        EXPECT_TRUE(r.ok());
    });
    EXPECT_TRUE(done);
}

TEST(Dht, TwentyNodesStoreViaAFindViaBForHundredKeys) {
    Cluster c(20, 3);
    crypto::DeterministicRng rng(3, "keys");
    int found = 0;
    int max_rounds = 0;
    for (int i = 0; i < 100; ++i) {
        const NodeId key = random_id(rng);
        const std::size_t a = rng.uniform(20), b = rng.uniform(20);
        ASSERT_TRUE(c.store(a, key, to_bytes("value" + std::to_string(i))));
        auto r = c.find(b, key);
        if (r.ok() && r.value->size() == 1 && (*r.value)[0].value == to_bytes("value" + std::to_string(i))) ++found;
        std::optional<Result<LookupResult>> lr;
        c.nodes[b].dht->find_node(key, [&](Result<LookupResult> x) { lr = std::move(x); });
        c.net.run_until([&] { return lr.has_value(); }, c.net.now() + seconds(10));
        ASSERT_TRUE(lr && lr->ok());
        max_rounds = std::max(max_rounds, lr->value->rounds);
    }
    EXPECT_EQ(found, 100);
    EXPECT_LE(max_rounds, static_cast<int>(std::log2(20.0)) + 3);
    for (auto& n : c.nodes) EXPECT_TRUE(n.dht->table().check_invariants());
}

TEST(Dht, TenPublishersUnderOneKeyAllReturned) {
    Cluster c(12, 4);
    const NodeId key = NodeId::of("multi", {});
    for (int i = 0; i < 10; ++i) ASSERT_TRUE(c.store(static_cast<std::size_t>(i), key, to_bytes("p" + std::to_string(i))));
    auto r = c.find(11, key);
    ASSERT_TRUE(r.ok());
    EXPECT_EQ(r.value->size(), 10u);
}

TEST(Dht, BarrierCountsDistinctSignals) {
    Cluster c(5, 5);
    auto signal = [&](std::size_t i, std::uint64_t round) {
        std::optional<bool> ok;
        c.nodes[i].dht->barrier_signal(round, [&](bool r) { ok = r; });
        c.net.run_until([&] { return ok.has_value(); }, c.net.now() + seconds(10));
        return ok.value_or(false);
    };
    auto count = [&](std::size_t via, std::uint64_t round) {
        std::optional<Result<std::size_t>> out;
        c.nodes[via].dht->barrier_count(round, [&](Result<std::size_t> r) { out = r; });
        c.net.run_until([&] { return out.has_value(); }, c.net.now() + seconds(10));
        return out && out->ok() ? static_cast<long>(*out->value) : -1L;
    };
    ASSERT_TRUE(signal(0, 7));
    ASSERT_TRUE(signal(1, 7));
    EXPECT_EQ(count(4, 7), 2);
    ASSERT_TRUE(signal(2, 7));
    EXPECT_EQ(count(3, 7), 3);
    ASSERT_TRUE(signal(2, 7));
    EXPECT_EQ(count(0, 7), 3);
    EXPECT_EQ(count(0, 8), 0);
}

TEST(Dht, ThirtyPercentDroppedAfterStoresLookupsRouteAround) {
    DhtConfig cfg;
    cfg.value_ttl = seconds(3600);
    Cluster c(20, 6, cfg);
    crypto::DeterministicRng rng(6, "dos");
    std::vector<std::pair<NodeId, Bytes>> kv;
    for (int i = 0; i < 100; ++i) {
        const NodeId key = random_id(rng);
        Bytes v = to_bytes("v" + std::to_string(i));
        ASSERT_TRUE(c.store(rng.uniform(20), key, v));
        kv.emplace_back(key, std::move(v));
    }
    std::vector<std::size_t> order(20);
    for (std::size_t i = 0; i < 20; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    std::set<std::size_t> dead(order.begin(), order.begin() + 6);
    for (auto i : dead) c.net.crash(c.nodes[i].endpoint);
    int ok = 0;
    for (const auto& [key, v] : kv) {
        std::size_t via;
        do via = rng.uniform(20);
        while (dead.count(via));
        auto r = c.find(via, key);
        if (r.ok() && r.value->size() == 1 && (*r.value)[0].value == v) ++ok;
    }
    EXPECT_EQ(ok, 100);
}

TEST(Dht, ValuesExpireAfterTtl) {
    DhtConfig cfg;
    cfg.value_ttl = seconds(2);
    Cluster c(4, 9, cfg);
    const NodeId key = NodeId::of("ttl", {});
    ASSERT_TRUE(c.store(0, key, to_bytes("x")));
    EXPECT_EQ(c.find(1, key).value->size(), 1u);
    c.net.run_for(seconds(3));
    EXPECT_EQ(c.find(1, key).value->size(), 0u);
}

TEST(Dht, AllPeersDeadIsLookupFailed) {
    Cluster c(3, 7);
    c.net.crash(c.nodes[1].endpoint);
    c.net.crash(c.nodes[2].endpoint);
    auto r = c.find(0, NodeId::of("gone", {}));
    EXPECT_FALSE(r.ok());
    EXPECT_EQ(r.error, Errc::LookupFailed);
}

TEST(Dht, OversizedValueRejected) {
    Cluster c(1, 8);
    EXPECT_THROW(c.nodes[0].dht->store(NodeId{}, Bytes(kMaxValueSize + 1), [](bool) {}), Error);
}
