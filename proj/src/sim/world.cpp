#include "zephyr/sim/world.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace zephyr::sim {

namespace {

using nlohmann::json;

std::uint64_t parse_round(std::string_view event) {
    const auto at = event.find("round=");
    if (at == std::string_view::npos) return 0;
    std::uint64_t r = 0;
    for (std::size_t i = at + 6; i < event.size() && event[i] >= '0' && event[i] <= '9'; ++i)
        r = r * 10 + static_cast<std::uint64_t>(event[i] - '0');
    return r;
}

std::string field(std::string_view event, std::string_view key) {
    const std::string k = std::string(key) + "=";
    const auto at = event.find(k);
    if (at == std::string_view::npos) return {};
    const auto end = event.find(' ', at);
    return std::string(event.substr(at + k.size(), end == std::string_view::npos ? end : end - at - k.size()));
}

std::string identity_of(std::size_t i) { return "user" + std::to_string(i) + "@zephyr.test"; }

}  // namespace

void SimConfig::validate() const {
    auto bad = [](const std::string& m) { throw Error(Errc::ConfigInvalid, m); };
    if (mixers == 0) bad("mixers must be at least 1");
    if (info_nodes == 0) bad("info_nodes must be at least 1");
    if (pkgs != 1) bad("exactly one PKG is supported");
    if (mailboxes == 0) bad("mailboxes must be at least 1");
    if (mailbox_count == 0) bad("mailbox_count must be at least 1");
    if (rounds == 0) bad("rounds must be at least 1");
    if (round_duration <= 0) bad("round_duration must be positive");
    for (auto i : withhold_barrier)
        if (i >= mixers) bad("withhold_barrier index out of range");
    for (const auto& f : fault_plan) {
        if (f.at < 0) bad("fault time must be non-negative");
        if (f.kind == FaultKind::DropRate && (f.rate < 0.0 || f.rate > 1.0)) bad("drop rate must be in [0, 1]");
    }
}

SimConfig parse_config(const std::string& text) {
    SimConfig c;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(Errc::ConfigInvalid, std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw Error(Errc::ConfigInvalid, "config must be a JSON object");
    static const std::vector<std::string> known = {"mixers",  "info_nodes", "pkgs",  "mailboxes",
                                                   "mailbox_count", "clients", "rounds", "seed",
                                                   "messages_per_client", "round_duration_ms", "fault_plan",
                                                   "withhold_barrier"};
    try {
        for (auto it = j.begin(); it != j.end(); ++it)
            if (std::find(known.begin(), known.end(), it.key()) == known.end())
                throw Error(Errc::ConfigInvalid, "unknown config key: " + it.key());
        c.mixers = j.value("mixers", c.mixers);
        c.info_nodes = j.value("info_nodes", c.info_nodes);
        c.pkgs = j.value("pkgs", c.pkgs);
        c.mailboxes = j.value("mailboxes", c.mailboxes);
        c.mailbox_count = j.value("mailbox_count", c.mailbox_count);
        c.clients = j.value("clients", c.clients);
        c.rounds = j.value("rounds", c.rounds);
        c.seed = j.value("seed", c.seed);
        c.messages_per_client = j.value("messages_per_client", c.messages_per_client);
        c.round_duration = net::ms(j.value("round_duration_ms", c.round_duration / 1000));
        c.withhold_barrier = j.value("withhold_barrier", c.withhold_barrier);
        for (const auto& f : j.value("fault_plan", json::array())) {
            FaultEvent e;
            e.at = net::ms(f.at("at_ms").get<std::int64_t>());
            e.node = f.at("node").get<std::string>();
            const auto action = f.at("action").get<std::string>();
            if (action == "crash") e.kind = FaultKind::Crash;
            else if (action == "recover") e.kind = FaultKind::Recover;
            else if (action == "drop-rate") {
                e.kind = FaultKind::DropRate;
                e.rate = f.at("rate").get<double>();
            } else {
                throw Error(Errc::ConfigInvalid, "unknown fault action: " + action);
            }
            c.fault_plan.push_back(e);
        }
    } catch (const json::exception& e) {
        throw Error(Errc::ConfigInvalid, std::string("bad config value: ") + e.what());
    }
    c.validate();
    return c;
}

SimConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::Io, "cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::uint64_t SimNode::messages_processed() const {
    if (mixer) return mixer->packets_processed();
    return rpc->frames_handled();
}

std::size_t SimNode::memory_estimate() const {
    std::size_t n = sizeof(*this);
    if (dht) n += dht->local_store().byte_size() + dht->table().size() * sizeof(dht::Contact);
    if (coordinator) n += coordinator->memory_estimate();
    if (mixer) n += mixer->memory_estimate();
    if (info) n += info->memory_estimate();
    if (pkg) n += pkg->memory_estimate();
    if (mailbox) n += mailbox->memory_estimate();
    if (client) n += client->memory_estimate();
    return n;
}

std::string csv_header() {
    return "node_role,node_id,round,bytes_received,bytes_sent,messages_processed,resident_set_estimate\n";
}

std::string to_csv(const std::vector<MetricsRow>& rows) {
    std::string out = csv_header();
    for (const auto& r : rows) {
        out += r.node_role + "," + r.node_id + "," + std::to_string(r.round) + "," + std::to_string(r.bytes_received) +
               "," + std::to_string(r.bytes_sent) + "," + std::to_string(r.messages_processed) + "," +
               std::to_string(r.resident_set_estimate) + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------

World::World(SimConfig config) : config_(std::move(config)), net_(config_.seed), rng_(config_.seed, "world") {
    config_.validate();
    net_.on_trace = [this](net::Time at, const std::string& ep, std::string_view ev) { on_trace(at, ep, ev); };
    build();
}

World::~World() {
    net_.on_trace = nullptr;
    // Services hold references into their node's Rpc; tear down in reverse.
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        auto& n = **it;
        n.client.reset();
        n.mixer.reset();
        n.coordinator.reset();
        n.info.reset();
        n.pkg.reset();
        n.mailbox.reset();
        n.dht.reset();
    }
}

SimNode& World::add(const std::string& name, const std::string& role) {
    auto n = std::make_unique<SimNode>();
    n->name = name;
    n->role = role;
    n->endpoint = name + ".sim:7000";
    n->rt = &net_.add_node(n->endpoint);
    n->key = std::make_unique<crypto::SigningKey>(crypto::SigningKey::generate(rng_));
    n->rpc = std::make_unique<net::Rpc>(*n->rt, NodeId::from_public_key(n->key->public_key()));
    auto* raw = n.get();
    by_name_[name] = raw;
    by_endpoint_[n->endpoint] = raw;
    nodes_.push_back(std::move(n));
    return *raw;
}

void World::build() {
    SimNode& coord = add("coordinator", "coordinator");
    const auto pinned = coord.key->public_key();

    std::vector<SimNode*> mixers, infos, boxes;
    for (std::size_t i = 0; i < config_.mixers; ++i) mixers.push_back(&add("mixer" + std::to_string(i), "mixer"));
    for (std::size_t i = 0; i < config_.info_nodes; ++i) infos.push_back(&add("info" + std::to_string(i), "info"));
    SimNode& pkg = add("pkg", "pkg");
    for (std::size_t i = 0; i < config_.mailboxes; ++i) boxes.push_back(&add("mailbox" + std::to_string(i), "mailbox"));

    plan_.pkg_endpoint = pkg.endpoint;
    for (auto* m : mixers) plan_.mixer_endpoints.push_back(m->endpoint);
    for (auto* m : infos) plan_.info_nodes.push_back(m->endpoint);
    for (auto* m : boxes) plan_.mailbox_servers.push_back(m->endpoint);
    plan_.mailbox_count = config_.mailbox_count;
    plan_.salt = rng_.array<32>();
    plan_.round_duration = config_.round_duration;

    dht_seeds_ = {coord.endpoint};
    coord.dht = std::make_unique<dht::Dht>(*coord.rpc);
    coord.coordinator = std::make_unique<coordinator::Coordinator>(*coord.rpc, coord.dht.get(), *coord.key, plan_);

    for (std::size_t i = 0; i < mixers.size(); ++i) {
        auto& m = *mixers[i];
        m.dht = std::make_unique<dht::Dht>(*m.rpc);
        m.authority = std::make_unique<Authority>(pinned);
        mixer::MixerConfig mc;
        mc.info_nodes = plan_.info_nodes;
        mc.substitute_timings = plan_;
        mc.withhold_barrier = std::find(config_.withhold_barrier.begin(), config_.withhold_barrier.end(), i) !=
                              config_.withhold_barrier.end();
        m.mixer = std::make_unique<mixer::Mixer>(*m.rpc, *m.dht, *m.authority, *m.key, mc);
    }
    for (auto* p : infos) {
        p->dht = std::make_unique<dht::Dht>(*p->rpc);
        p->authority = std::make_unique<Authority>(pinned);
        p->info = std::make_unique<info::InfoNode>(*p->rpc, *p->dht, *p->authority);
    }
    pkg.authority = std::make_unique<Authority>(pinned);
    pkg.pkg_core = std::make_unique<pkg::PkgCore>(pkg::PkgConfig{}, pkg.rt->rng(), email_);
    pkg.pkg = std::make_unique<pkg::PkgServer>(*pkg.rpc, *pkg.authority, *pkg.pkg_core);
    for (auto* b : boxes) {
        b->authority = std::make_unique<Authority>(pinned);
        b->store = std::make_unique<mailbox::MemoryStore>();
        b->mailbox = std::make_unique<mailbox::MailboxServer>(*b->rpc, *b->authority, *b->store);
    }
    for (std::size_t i = 0; i < config_.clients; ++i) {
        auto& c = add("client" + std::to_string(i), "client");
        client::ClientConfig cc;
        cc.identity = identity_of(i);
        cc.info_nodes = plan_.info_nodes;
        cc.pinned = pinned;
        c.client = std::make_unique<client::Client>(*c.rpc, cc,
                                                    [this](const std::string& id) { return email_.last_code(id); });
        c.client->on_enrolled = [this, i](std::uint64_t r) { client_enrolled(i, r); };
        c.client->on_fetched = [this, i](std::uint64_t r, const std::vector<client::Delivered>& got) {
            const std::string me = identity_of(i);
            for (const auto& d : got) {
                const std::string text(d.plaintext.begin(), d.plaintext.end());
                auto it = expected_.find(text);
                if (it == expected_.end() || it->second != me) ++misdelivered_;
                else ++received_[me + "|" + text];
            }
            ++fetched_[r];
        };
    }
    for (auto& n : nodes_) wire_crash(*n);
}

void World::wire_crash(SimNode& n) {
    n.rt->on_crash = [this, &n] {
        n.rpc->reset();
        if (n.dht) n.dht->reset();
        if (n.authority) n.authority->reset();
        if (n.coordinator) n.coordinator->reset();
        if (n.mixer) n.mixer->reset();
        if (n.info) n.info->reset();
        if (n.client) n.client->stop();
        if (n.pkg) {
            n.pkg.reset();
            n.pkg_core = std::make_unique<pkg::PkgCore>(pkg::PkgConfig{}, n.rt->rng(), email_);
            n.pkg = std::make_unique<pkg::PkgServer>(*n.rpc, *n.authority, *n.pkg_core);
        }
        if (n.mailbox) {
            n.mailbox.reset();
            n.store = std::make_unique<mailbox::MemoryStore>();
            n.mailbox = std::make_unique<mailbox::MailboxServer>(*n.rpc, *n.authority, *n.store);
        }
    };
    n.rt->on_recover = [this, &n] {
        if (n.dht) n.dht->bootstrap(dht_seeds_, [](bool) {});
        if (n.coordinator) n.coordinator->recover();
        if (n.client) n.client->start();
    };
}

void World::start() {
    std::vector<std::string> seeds = dht_seeds_;
    for (auto& n : nodes_)
        if (n->dht) n->dht->bootstrap(seeds, [](bool) {});
    net_.run_for(net::seconds(1));
    for (auto& n : nodes_)
        if (n->dht && n->role != "coordinator") n->dht->bootstrap(seeds, [](bool) {});
    net_.run_for(net::seconds(1));
    const net::Time base = net_.now();
    for (const auto& f : config_.fault_plan) {
        net_.at(base + f.at, [this, f] {
            if (f.kind == FaultKind::Crash) crash(f.node);
            else if (f.kind == FaultKind::Recover) recover(f.node);
            else net_.set_drop_rate(node(f.node).endpoint, f.rate);
        });
    }
    coordinator().coordinator->start(1);
    for (auto* c : role("client")) c->client->start();
}

SimNode& World::node(const std::string& name) {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw Error(Errc::ConfigInvalid, "unknown node " + name);
    return *it->second;
}

std::vector<SimNode*> World::role(const std::string& r) {
    std::vector<SimNode*> out;
    for (auto& n : nodes_)
        if (n->role == r) out.push_back(n.get());
    return out;
}

void World::crash(const std::string& name) { net_.crash(node(name).endpoint); }
void World::recover(const std::string& name) { net_.recover(node(name).endpoint); }

void World::client_enrolled(std::size_t index, std::uint64_t round) {
    if (round > config_.rounds) return;
    auto& c = *node("client" + std::to_string(index)).client;
    for (std::size_t k = 0; k < config_.messages_per_client; ++k) {
        std::size_t to = index;
        if (config_.clients > 1) {
            to = static_cast<std::size_t>(rng_.uniform(config_.clients - 1));
            if (to >= index) ++to;
        }
        const std::string text = "round " + std::to_string(round) + " from " + identity_of(index) + " #" +
                                 std::to_string(k) + " to " + identity_of(to);
        expected_[text] = identity_of(to);
        c.queue(identity_of(to), Bytes(text.begin(), text.end()));
    }
}

std::size_t World::fetched(std::uint64_t round) const {
    auto it = fetched_.find(round);
    return it == fetched_.end() ? 0 : it->second;
}

DeliveryStats World::delivery() const {
    DeliveryStats s;
    s.expected = expected_.size();
    for (auto* c : const_cast<World*>(this)->role("client")) s.submitted += c->client->sent();
    s.misdelivered = misdelivered_;
    for (const auto& [text, to] : expected_) {
        auto it = received_.find(to + "|" + text);
        if (it == received_.end()) {
            ++s.missing;
            continue;
        }
        ++s.delivered;
        s.duplicated += it->second - 1;
    }
    return s;
}

void World::on_trace(net::Time at, const std::string& endpoint, std::string_view event) {
    auto it = by_endpoint_.find(endpoint);
    TraceEvent e{trace_.size(), at, it == by_endpoint_.end() ? endpoint : it->second->name, std::string(event)};
    trace_.push_back(e);
    if (event.starts_with("round-open ")) {
        const auto r = parse_round(event);
        rounds_opened_ = std::max(rounds_opened_, r);
        snapshot(r);
    }
    if (on_event) on_event(trace_.back());
}

void World::snapshot(std::uint64_t round) {
    if (round <= last_snapshot_round_) return;
    const bool emit = last_snapshot_round_ > 0;
    for (auto& n : nodes_) {
        const auto& st = n->rt->stats();
        Counters now{st.bytes_received, st.bytes_sent, n->messages_processed()};
        Counters& prev = last_[n->name];
        if (emit) {
            for (std::uint64_t r = last_snapshot_round_; r < round; ++r) {
                MetricsRow row;
                row.node_role = n->role;
                row.node_id = n->id().hex();
                row.round = r;
                // Skipped rounds (a failed rotation) carry no traffic of their own.
                if (r + 1 == round) {
                    row.bytes_received = now.received - prev.received;
                    row.bytes_sent = now.sent - prev.sent;
                    row.messages_processed = now.processed - prev.processed;
                }
                row.resident_set_estimate = n->memory_estimate();
                metrics_.push_back(row);
            }
        }
        prev = now;
    }
    last_snapshot_round_ = round;
}

// ---------------------------------------------------------------------------

std::vector<std::string> check_single_actor(const std::vector<TraceEvent>& trace) {
    std::map<std::pair<std::uint64_t, std::string>, std::string> actor;
    std::vector<std::string> out;
    for (const auto& e : trace) {
        if (!e.event.starts_with("coord-act ")) continue;
        const auto key = std::make_pair(parse_round(e.event), field(e.event, "phase"));
        const std::string who = field(e.event, "node");
        auto [it, fresh] = actor.emplace(key, who);
        if (!fresh && it->second != who)
            out.push_back("two coordinators acted in round " + std::to_string(key.first) + " phase " + key.second);
    }
    return out;
}

SimReport run_sim(const SimConfig& config) {
    World w(config);
    w.start();
    const std::uint64_t last = config.rounds;
    const net::Time deadline =
        w.now() + static_cast<net::Time>(last + 1) * (config.round_duration + net::seconds(120)) + net::seconds(30);
    const bool finished = w.run_until(
        [&] { return w.rounds_opened() > last && w.fetched(last) >= config.clients; }, deadline);

    SimReport rep;
    rep.rows = w.metrics();
    rep.delivery = w.delivery();
    rep.rounds_completed = w.rounds_opened() > 0 ? w.rounds_opened() - 1 : 0;
    if (!finished) rep.violations.push_back("simulation did not complete all rounds before the deadline");
    for (auto& v : check_single_actor(w.trace())) rep.violations.push_back(v);
    for (auto* m : w.role("mixer"))
        for (const auto& [r, report] : m->mixer->reports())
            if (!report.conserved())
                rep.violations.push_back("mixer " + m->name + " round " + std::to_string(r) + " lost count of packets");
    if (rep.delivery.misdelivered > 0)
        rep.violations.push_back(std::to_string(rep.delivery.misdelivered) + " messages opened by the wrong client");
    if (config.fault_plan.empty() && config.withhold_barrier.empty() && rep.delivery.missing > 0)
        rep.violations.push_back(std::to_string(rep.delivery.missing) + " messages were not delivered");

    std::ostringstream s;
    s << "rounds completed: " << rep.rounds_completed << "\n";
    s << "messages: expected " << rep.delivery.expected << ", submitted " << rep.delivery.submitted << ", delivered "
      << rep.delivery.delivered << ", missing " << rep.delivery.missing << ", misdelivered "
      << rep.delivery.misdelivered << ", duplicated " << rep.delivery.duplicated << "\n";
    const auto per = [&](std::size_t servers) { return static_cast<double>(config.clients) / static_cast<double>(servers); };
    s << std::fixed << std::setprecision(1) << "clients: " << config.clients << " total, " << per(config.pkgs)
      << " per pkg, " << per(config.info_nodes) << " per info node, " << per(config.mailboxes)
      << " per mailbox server, " << per(config.mixers) << " per mixer\n";
    std::map<std::string, std::pair<std::uint64_t, std::array<double, 4>>> per_role;
    for (const auto& r : rep.rows) {
        auto& [n, sums] = per_role[r.node_role];
        ++n;
        sums[0] += static_cast<double>(r.bytes_received);
        sums[1] += static_cast<double>(r.bytes_sent);
        sums[2] += static_cast<double>(r.messages_processed);
        sums[3] += static_cast<double>(r.resident_set_estimate);
    }
    s << "per-role averages per node per round (bytes_received, bytes_sent, messages_processed, "
         "resident_set_estimate):\n";
    for (const auto& [role, v] : per_role) {
        const double n = static_cast<double>(v.first);
        s << "  " << std::left << std::setw(12) << role << std::fixed << std::setprecision(1) << v.second[0] / n << "  "
          << v.second[1] / n << "  " << v.second[2] / n << "  " << v.second[3] / n << "\n";
    }
    for (const auto& v : rep.violations) s << "VIOLATION: " << v << "\n";
    rep.summary = s.str();
    return rep;
}

}  // namespace zephyr::sim
