#include "zephyr/sim/scenarios.hpp"

#include <algorithm>
#include <set>

#include "zephyr/sim/stats.hpp"
#include "zephyr/sim/world.hpp"
#include "zephyr/wire.hpp"

namespace zephyr::sim {

namespace {

constexpr std::size_t kTailLength = 40;

bool has_round(const std::string& event, std::uint64_t round) {
    return event.find("round=" + std::to_string(round) + " ") != std::string::npos ||
           event.ends_with("round=" + std::to_string(round));
}

std::string fingerprint(const std::vector<TraceEvent>& trace) {
    crypto::Digest32 d{};
    for (const auto& e : trace) {
        wire::Writer w;
        w.u64(static_cast<std::uint64_t>(e.at)).str(e.node).str(e.event);
        d = crypto::hash256("zephyr-trace", {ByteView(d), w.data()});
    }
    return to_hex(d);
}

void finish(ScenarioResult& r, const World& w) {
    r.fingerprint = fingerprint(w.trace());
    const auto& t = w.trace();
    for (std::size_t i = t.size() > kTailLength ? t.size() - kTailLength : 0; i < t.size(); ++i)
        r.trace_tail.push_back(std::to_string(t[i].at) + " " + t[i].node + " " + t[i].event);
}

void check(ScenarioResult& r, bool ok, std::string what) { r.checks.push_back({ok, std::move(what)}); }

SimConfig small_config(std::uint64_t seed) {
    SimConfig c;
    c.mixers = 3;
    c.info_nodes = 2;
    c.mailboxes = 2;
    c.clients = 4;
    c.rounds = 1;
    c.messages_per_client = 2;
    c.seed = seed;
    return c;
}

}  // namespace

bool ScenarioResult::passed() const {
    return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

std::vector<std::string> scenario_names() { return {"barrier", "failover", "rotation", "unlinkability", "dos-routing"}; }

ScenarioResult run_scenario(const std::string& name, std::uint64_t seed) {
    if (name == "barrier") return barrier_scenario(seed);
    if (name == "failover") return failover_scenario(seed);
    if (name == "rotation") return rotation_scenario(seed);
    if (name == "unlinkability") return unlinkability_scenario(seed);
    if (name == "dos-routing") return dos_routing_scenario(seed);
    throw Error(Errc::ConfigInvalid, "unknown scenario " + name);
}

// ---------------------------------------------------------------------------

ScenarioResult barrier_scenario(std::uint64_t seed) {
    ScenarioResult res;
    res.name = "barrier";
    {
        SimConfig c = small_config(seed);
        c.withhold_barrier = {0};
        World w(c);
        w.start();
        auto timeouts = [&] {
            std::size_t n = 0;
            for (const auto& e : w.trace())
                if (e.event.starts_with("barrier-timeout ") && has_round(e.event, 1)) ++n;
            return n;
        };
        w.run_until([&] { return timeouts() >= c.mixers; }, w.now() + net::seconds(120));
        std::size_t peels = 0, signals = 0, passed = 0;
        for (const auto& e : w.trace()) {
            if (!has_round(e.event, 1)) continue;
            if (e.event.starts_with("peel ")) ++peels;
            if (e.event.starts_with("barrier-signal ")) ++signals;
            if (e.event.starts_with("barrier-passed ")) ++passed;
        }
        check(res, timeouts() == c.mixers, "withheld: every mixer hit the barrier timeout (" +
                                               std::to_string(timeouts()) + "/" + std::to_string(c.mixers) + ")");
        check(res, signals == c.mixers - 1, "withheld: " + std::to_string(signals) + " of " +
                                                std::to_string(c.mixers) + " mixers signalled readiness");
        check(res, passed == 0, "withheld: no mixer passed the barrier");
        check(res, peels == 0, "withheld: zero peel operations (" + std::to_string(peels) + ")");
        bool aborted = true;
        for (auto* m : w.role("mixer")) {
            auto it = m->mixer->reports().find(1);
            aborted = aborted && it != m->mixer->reports().end() && it->second.aborted && it->second.conserved();
        }
        check(res, aborted, "withheld: every mixer reported the round aborted with conserved counts");
    }
    {
        SimConfig c = small_config(seed);
        World w(c);
        w.start();
        w.run_until([&] { return w.rounds_opened() > 1 && w.fetched(1) >= c.clients; }, w.now() + net::seconds(120));
        std::map<std::string, std::uint64_t> passed_at;
        std::uint64_t last_signal = 0;
        std::size_t peels = 0;
        bool ordered = true;
        for (const auto& e : w.trace()) {
            if (!has_round(e.event, 1)) continue;
            if (e.event.starts_with("barrier-signal ")) last_signal = std::max(last_signal, e.index);
            if (e.event.starts_with("barrier-passed ")) {
                passed_at[e.node] = e.index;
                ordered = ordered && e.index > last_signal;
            }
            if (e.event.starts_with("peel ")) {
                ++peels;
                ordered = ordered && passed_at.count(e.node) > 0;
            }
        }
        std::size_t signals = 0;
        for (const auto& e : w.trace())
            if (e.event.starts_with("barrier-signal ") && has_round(e.event, 1)) ++signals;
        check(res, signals == c.mixers && passed_at.size() == c.mixers,
              "all signalling: every mixer signalled and passed the barrier");
        check(res, ordered, "all signalling: every pass follows every signal and every peel follows its mixer's pass");
        check(res, peels > 0, "all signalling: mixing proceeded (" + std::to_string(peels) + " peels)");
        const auto d = w.delivery();
        check(res, d.missing == 0 && d.misdelivered == 0,
              "all signalling: " + std::to_string(d.delivered) + "/" + std::to_string(d.expected) + " delivered");
        finish(res, w);
    }
    return res;
}

ScenarioResult failover_scenario(std::uint64_t seed) {
    ScenarioResult res;
    res.name = "failover";
    SimConfig c = small_config(seed);
    c.rounds = 3;
    World w(c);
    bool armed = false;
    w.on_event = [&](const TraceEvent& e) {
        if (armed || !e.event.starts_with("round-open ") || !has_round(e.event, 1)) return;
        armed = true;
        const net::Time t = e.at;
        w.network().at(t + net::seconds(3), [&w] { w.crash("coordinator"); });
        w.network().at(t + net::seconds(7), [&w] { w.recover("coordinator"); });
    };
    w.start();
    w.run_until([&] { return w.rounds_opened() > c.rounds && w.fetched(c.rounds) >= c.clients; },
                w.now() + net::seconds(400));

    NodeId lowest;
    std::string lowest_name;
    for (auto* m : w.role("mixer"))
        if (lowest_name.empty() || m->id() < lowest) {
            lowest = m->id();
            lowest_name = m->name;
        }
    std::set<std::string> takers;
    std::string round1_done_by, handback_at;
    std::map<std::uint64_t, std::string> opened_by;
    bool crashed_mid_round = false;
    for (const auto& e : w.trace()) {
        if (e.event.starts_with("failover-takeover ") && has_round(e.event, 1)) takers.insert(e.node);
        if (e.event.starts_with("round-done ") && has_round(e.event, 1)) round1_done_by = e.node;
        if (e.event.starts_with("handback-accepted ") && has_round(e.event, 2)) handback_at = e.node;
        if (e.event.starts_with("round-open ")) {
            for (std::uint64_t r = 1; r <= c.rounds; ++r)
                if (has_round(e.event, r) && !opened_by.count(r)) opened_by[r] = e.node;
        }
        if (e.event == "crash" && e.node == "coordinator") crashed_mid_round = !opened_by.empty() && round1_done_by.empty();
    }
    check(res, crashed_mid_round, "coordinator crashed while round 1 was in progress");
    check(res, takers.size() == 1 && takers.count(lowest_name),
          "exactly the lowest-id mixer (" + lowest_name + ") took over round 1");
    check(res, round1_done_by == lowest_name, "round 1 completed under the substitute");
    check(res, handback_at == "coordinator", "substitute handed round 2 back to the recovered coordinator");
    bool original = true;
    for (std::uint64_t r = 2; r <= c.rounds; ++r) original = original && opened_by[r] == "coordinator";
    check(res, original, "original coordinator opened every round after the failover");
    const auto unsafe = check_single_actor(w.trace());
    check(res, unsafe.empty(), "at most one coordinator acted per round and phase");
    const auto d = w.delivery();
    check(res, d.missing == 0 && d.misdelivered == 0,
          std::to_string(d.delivered) + "/" + std::to_string(d.expected) + " messages delivered across the failover");
    finish(res, w);
    return res;
}

ScenarioResult rotation_scenario(std::uint64_t seed) {
    ScenarioResult res;
    res.name = "rotation";
    SimConfig c = small_config(seed);
    c.rounds = 2;
    c.clients = 2;
    c.messages_per_client = 1;
    World w(c);
    w.start();
    auto& cl = *w.node("client0").client;
    const net::Time deadline = w.now() + net::seconds(200);
    w.run_until([&] { return cl.session() && cl.session()->round >= 1; }, deadline);
    const auto s1 = cl.session() ? std::optional(*cl.session()) : std::nullopt;
    w.run_until([&] { return cl.session() && cl.session()->round >= 2; }, deadline);
    const auto s2 = cl.session() ? std::optional(*cl.session()) : std::nullopt;
    check(res, s1 && s2 && s1->round == 1 && s2->round == 2, "client enrolled in rounds 1 and 2");
    if (!s1 || !s2) {
        finish(res, w);
        return res;
    }

    bool disjoint = s1->bundle.mpk != s2->bundle.mpk && s1->bundle.state.directory.mixers.size() > 0;
    for (const auto& a : s1->bundle.records)
        for (const auto& b : s2->bundle.records) disjoint = disjoint && a.public_key != b.public_key;
    disjoint = disjoint && envelope::serialize(s1->own_key) != envelope::serialize(s2->own_key);
    check(res, disjoint, "round 2 bundle shares no mixer key, master key or identity key with round 1");

    bool erased = true;
    for (auto* m : w.role("mixer")) erased = erased && !m->mixer->public_key(1);
    check(res, erased, "mixers dropped their round 1 keys");

    crypto::DeterministicRng rng(seed, "rotation-trials");
    const auto mpk1 = envelope::deserialize_mpk(s1->bundle.mpk);
    const auto rcpt = crypto::ibe_precompute(mpk1, s1->identity);
    int opened_new = 0, opened_old = 0;
    for (int i = 0; i < 100; ++i) {
        const Bytes msg = rng.bytes(16 + rng.uniform(64));
        const auto sealed = envelope::seal_to_recipient(rcpt, msg, rng);
        if (envelope::open_as_recipient(s2->own_key, sealed)) ++opened_new;
        if (i < 10 && envelope::open_as_recipient(s1->own_key, sealed)) ++opened_old;
    }
    check(res, opened_new == 0, "round 1 ciphertexts opened by the round 2 key: " + std::to_string(opened_new) + "/100");
    check(res, opened_old == 10, "round 1 ciphertexts opened by the round 1 key: " + std::to_string(opened_old) + "/10");

    std::optional<Errc> answer;
    bool answered = false;
    const auto& first = s1->bundle.records.front();
    w.node("client1").rpc->call(first.address.endpoint(), net::Opcode::Submit,
                                mixer::encode_submit(1, Bytes(envelope::kLayerOverhead + 8, 0)), net::seconds(2),
                                [&](net::Response r) {
                                    answered = true;
                                    answer = r.error;
                                });
    w.run_until([&] { return answered; }, w.now() + net::seconds(5));
    check(res, answered && answer == Errc::WrongRound, "a round 1 submission during round 2 is refused as wrong-round");
    finish(res, w);
    return res;
}

ScenarioResult unlinkability_scenario(std::uint64_t seed) {
    ScenarioResult res;
    res.name = "unlinkability";
    crypto::DeterministicRng rng(seed, "unlinkability");

    std::vector<std::uint64_t> perms(24, 0);
    for (int t = 0; t < 24000; ++t) {
        const auto p = mixer::fisher_yates(4, rng);
        std::size_t code = 0;
        std::vector<std::size_t> rest = {0, 1, 2, 3};
        std::size_t radix = 6;
        for (std::size_t i = 0; i < 3; ++i) {
            auto at = std::find(rest.begin(), rest.end(), p[i]);
            code += static_cast<std::size_t>(at - rest.begin()) * radix;
            rest.erase(at);
            radix /= (3 - i);
        }
        ++perms[code];
    }
    const auto a = chi_square_uniform(perms);
    check(res, a.p_value > 0.001, "fisher_yates n=4 over 24000 trials: chi2=" + std::to_string(a.statistic) +
                                      " p=" + std::to_string(a.p_value));

    constexpr std::size_t kBatch = 8;
    std::vector<std::uint64_t> pos(kBatch, 0);
    for (int t = 0; t < 10000; ++t) {
        std::vector<int> batch(kBatch, 0);
        batch[0] = 1;
        mixer::shuffle_batch(batch, rng);
        ++pos[static_cast<std::size_t>(std::find(batch.begin(), batch.end(), 1) - batch.begin())];
    }
    const auto b = chi_square_uniform(pos);
    check(res, b.p_value > 0.001, "marked message output position over 10000 batches: chi2=" +
                                      std::to_string(b.statistic) + " p=" + std::to_string(b.p_value));
    return res;
}

ScenarioResult dos_routing_scenario(std::uint64_t seed) {
    ScenarioResult res;
    res.name = "dos-routing";
    constexpr std::size_t kNodes = 20;
    net::SimNetwork net(seed);
    crypto::DeterministicRng rng(seed, "dos-routing");
    std::vector<std::unique_ptr<net::Rpc>> rpcs;
    std::vector<std::unique_ptr<dht::Dht>> dhts;
    std::vector<std::string> eps;
    for (std::size_t i = 0; i < kNodes; ++i) {
        eps.push_back("dht" + std::to_string(i) + ".sim:7000");
        auto& rt = net.add_node(eps.back());
        rpcs.push_back(std::make_unique<net::Rpc>(rt, NodeId::from_public_key(rng.bytes(32))));
        dhts.push_back(std::make_unique<dht::Dht>(*rpcs.back()));
    }
    for (auto& d : dhts) d->bootstrap({eps[0]}, [](bool) {});
    net.run_for(net::seconds(2));
    for (auto& d : dhts) d->bootstrap({eps[0]}, [](bool) {});
    net.run_for(net::seconds(2));

    constexpr int kValues = 100;
    std::vector<std::pair<NodeId, Bytes>> stored;
    int store_ok = 0;
    for (int i = 0; i < kValues; ++i) {
        const NodeId key = NodeId::from_public_key(rng.bytes(32));
        Bytes value = rng.bytes(32);
        stored.emplace_back(key, value);
        dhts[rng.uniform(kNodes)]->store(key, value, [&](bool ok) { store_ok += ok ? 1 : 0; });
    }
    net.run_for(net::seconds(2));
    check(res, store_ok == kValues, "stores acknowledged: " + std::to_string(store_ok) + "/" + std::to_string(kValues));

    std::vector<std::size_t> order(kNodes);
    for (std::size_t i = 0; i < kNodes; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    std::set<std::size_t> down(order.begin(), order.begin() + kNodes * 3 / 10);
    for (auto i : down) net.crash(eps[i]);
    std::vector<std::size_t> up;
    for (std::size_t i = 0; i < kNodes; ++i)
        if (!down.count(i)) up.push_back(i);

    int found = 0, done = 0;
    for (int i = 0; i < 100; ++i) {
        const auto& [key, value] = stored[rng.uniform(stored.size())];
        dhts[up[rng.uniform(up.size())]]->find_value(key, [&, value](Result<std::vector<dht::DhtValue>> r) {
            ++done;
            if (!r.ok()) return;
            for (const auto& v : *r.value)
                if (v.value == value) {
                    ++found;
                    return;
                }
        });
    }
    net.run_until([&] { return done == 100; }, net.now() + net::seconds(15));
    check(res, found == 100, std::to_string(down.size()) + " of " + std::to_string(kNodes) +
                                 " nodes down: " + std::to_string(found) + "/100 lookups found their value");
    return res;
}

}  // namespace zephyr::sim
