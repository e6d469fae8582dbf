#include "zephyr/dht.hpp"

#include <algorithm>
#include <set>

#include "zephyr/wire.hpp"

namespace zephyr::dht {

using net::Opcode;

// ---------------------------------------------------------------------------
// RoutingTable

RoutingTable::RoutingTable(NodeId self, std::size_t k) : self_(self), k_(k), buckets_(NodeId::kBits) {
    if (k == 0) throw Error(Errc::ConfigInvalid, "k must be positive");
}

std::size_t RoutingTable::bucket_index(const NodeId& id) const {
    const int i = distance_log2(xor_distance(self_, id));
    return i < 0 ? 0 : static_cast<std::size_t>(i);
}

RoutingTable::Update RoutingTable::observe(const Contact& c) {
    if (c.id == self_) return Update::Self;
    auto& b = buckets_[bucket_index(c.id)];
    auto it = std::find_if(b.begin(), b.end(), [&](const Contact& x) { return x.id == c.id; });
    if (it != b.end()) {
        b.erase(it);
        b.push_back(c);
        return Update::Refreshed;
    }
    if (b.size() >= k_) return Update::BucketFull;
    b.push_back(c);
    return Update::Inserted;
}

void RoutingTable::replace(const NodeId& stale, const Contact& fresh) {
    remove(stale);
    observe(fresh);
}

bool RoutingTable::remove(const NodeId& id) {
    if (id == self_) return false;
    auto& b = buckets_[bucket_index(id)];
    auto it = std::find_if(b.begin(), b.end(), [&](const Contact& x) { return x.id == id; });
    if (it == b.end()) return false;
    b.erase(it);
    return true;
}

bool RoutingTable::contains(const NodeId& id) const {
    if (id == self_) return false;
    const auto& b = buckets_[bucket_index(id)];
    return std::any_of(b.begin(), b.end(), [&](const Contact& x) { return x.id == id; });
}

std::optional<Contact> RoutingTable::head_for(const NodeId& id) const {
    const auto& b = buckets_[bucket_index(id)];
    if (b.empty()) return std::nullopt;
    return b.front();
}

std::vector<Contact> RoutingTable::closest(const NodeId& target, std::size_t n) const {
    std::vector<Contact> all;
    for (const auto& b : buckets_) all.insert(all.end(), b.begin(), b.end());
    std::sort(all.begin(), all.end(), [&](const Contact& a, const Contact& b) {
        return xor_distance(a.id, target) < xor_distance(b.id, target);
    });
    if (all.size() > n) all.resize(n);
    return all;
}

std::size_t RoutingTable::size() const {
    std::size_t n = 0;
    for (const auto& b : buckets_) n += b.size();
    return n;
}

bool RoutingTable::check_invariants() const {
    std::set<NodeId> seen;
    for (std::size_t i = 0; i < buckets_.size(); ++i) {
        if (buckets_[i].size() > k_) return false;
        for (const auto& c : buckets_[i]) {
            if (c.id == self_) return false;
            if (distance_log2(xor_distance(self_, c.id)) != static_cast<int>(i)) return false;
            if (!seen.insert(c.id).second) return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// ValueStore

void ValueStore::put(const NodeId& key, const NodeId& publisher, Bytes value, net::Time expiry, bool replace) {
    auto& set = data_[key];
    if (replace) {
        for (auto it = set.begin(); it != set.end();) {
            if (it->first.first == publisher) it = set.erase(it);
            else ++it;
        }
    }
    const auto h = crypto::hash256("zephyr-dht-value", {value});
    auto& slot = set[{publisher, h}];
    slot.publisher = publisher;
    slot.expiry = std::max(slot.expiry, expiry);
    slot.value = std::move(value);
}

std::vector<DhtValue> ValueStore::get(const NodeId& key, net::Time now) const {
    std::vector<DhtValue> out;
    auto it = data_.find(key);
    if (it == data_.end()) return out;
    for (const auto& [k, v] : it->second)
        if (v.expiry > now) out.push_back(v);
    return out;
}

void ValueStore::expire(net::Time now) {
    for (auto it = data_.begin(); it != data_.end();) {
        auto& set = it->second;
        for (auto v = set.begin(); v != set.end();) {
            if (v->second.expiry <= now) v = set.erase(v);
            else ++v;
        }
        if (set.empty()) it = data_.erase(it);
        else ++it;
    }
}

std::size_t ValueStore::byte_size() const {
    std::size_t n = 0;
    for (const auto& [k, set] : data_)
        for (const auto& [kk, v] : set) n += v.value.size() + 2 * NodeId::kBytes + 8;
    return n;
}

// ---------------------------------------------------------------------------
// Wire helpers

namespace {

void write_contacts(wire::Writer& w, const std::vector<Contact>& cs) {
    w.u32(static_cast<std::uint32_t>(cs.size()));
    for (const auto& c : cs) w.raw(c.id.bytes).str(c.endpoint);
}

std::vector<Contact> read_contacts(wire::Reader& r, std::size_t max) {
    const std::size_t at = r.offset();
    const std::uint32_t n = r.u32();
    if (n > max) throw MalformedError(at, "too many contacts");
    std::vector<Contact> out;
    for (std::uint32_t i = 0; i < n; ++i) {
        Contact c;
        c.id.bytes = r.array<NodeId::kBytes>();
        c.endpoint = r.str(net::kMaxEndpointSize);
        out.push_back(std::move(c));
    }
    return out;
}

NodeId read_id(wire::Reader& r) {
    NodeId id;
    id.bytes = r.array<NodeId::kBytes>();
    return id;
}

}  // namespace

// ---------------------------------------------------------------------------
// Dht

struct Dht::Lookup {
    enum class State { Unqueried, InFlight, Responded, Failed };
    struct Candidate {
        Contact contact;
        State state = State::Unqueried;
        int depth = 1;
    };
    NodeId target;
    LookupMode mode;
    LookupCallback done;
    std::map<Distance, Candidate> candidates;
    std::map<std::pair<NodeId, crypto::Digest32>, DhtValue> values;
    int inflight = 0;
    bool finished = false;
    LookupResult result;
};

Dht::Dht(net::Rpc& rpc, DhtConfig config)
    : rpc_(rpc), config_(config), table_(rpc.self(), config.k), alive_(std::make_shared<bool>(true)) {
    if (config_.alpha == 0) throw Error(Errc::ConfigInvalid, "alpha must be positive");
    for (Opcode op : {Opcode::Ping, Opcode::Store, Opcode::FindNode, Opcode::FindValue})
        rpc_.on(op, [this](const net::Request& req, net::Responder resp) { handle(req, std::move(resp)); });
    rpc_.on_peer_seen = [this](Opcode op, const NodeId& id, const std::string& endpoint) {
        if (op == Opcode::Ping || op == Opcode::Store || op == Opcode::FindNode || op == Opcode::FindValue)
            observe(Contact{id, endpoint});
    };
}

Dht::~Dht() {
    *alive_ = false;
    rpc_.on_peer_seen = nullptr;
}

void Dht::reset() {
    *alive_ = false;
    alive_ = std::make_shared<bool>(true);
    table_ = RoutingTable(rpc_.self(), config_.k);
    store_ = ValueStore{};
    pinging_.clear();
    joined_ = false;
}

void Dht::observe(const Contact& c) {
    if (c.id == rpc_.self() || c.endpoint.empty()) return;
    if (table_.observe(c) != RoutingTable::Update::BucketFull) return;
    auto head = table_.head_for(c.id);
    if (!head || pinging_.count(head->id)) return;
    pinging_[head->id] = true;
    auto alive = alive_;
    const Contact stale = *head;
    rpc_.call(stale.endpoint, Opcode::Ping, {}, config_.rpc_timeout, [this, alive, stale, c](net::Response r) {
        if (!*alive) return;
        pinging_.erase(stale.id);
        if (r.ok()) table_.observe(stale);
        else table_.replace(stale.id, c);
    });
}

Bytes Dht::encode_contacts(const std::vector<Contact>& cs) const {
    wire::Writer w;
    write_contacts(w, cs);
    return std::move(w).take();
}

void Dht::handle(const net::Request& req, net::Responder resp) {
    const net::Time now = rpc_.runtime().now();
    store_.expire(now);
    wire::Reader r(req.payload);
    switch (req.opcode) {
        case Opcode::Ping:
            r.finish();
            resp.ok();
            return;
        case Opcode::Store: {
            const NodeId key = read_id(r);
            const NodeId publisher = read_id(r);
            const std::uint64_t ttl = r.u64();
            const std::uint8_t flags = r.u8();
            Bytes value = r.bytes(kMaxValueSize);
            r.finish();
            const auto capped = static_cast<net::Duration>(std::min<std::uint64_t>(ttl, 4 * config_.value_ttl));
            store_.put(key, publisher, std::move(value), now + capped, flags & 1);
            resp.ok();
            return;
        }
        case Opcode::FindNode: {
            const NodeId target = read_id(r);
            r.finish();
            resp.ok(encode_contacts(table_.closest(target, config_.k)));
            return;
        }
        case Opcode::FindValue: {
            const NodeId key = read_id(r);
            r.finish();
            wire::Writer w;
            const auto values = store_.get(key, now);
            w.u32(static_cast<std::uint32_t>(values.size()));
            for (const auto& v : values)
                w.raw(v.publisher.bytes).u64(static_cast<std::uint64_t>(v.expiry - now)).bytes(v.value);
            write_contacts(w, table_.closest(key, config_.k));
            resp.ok(std::move(w).take());
            return;
        }
        default:
            resp.fail(Errc::UnknownOpcode, "not a dht opcode");
    }
}

void Dht::ping(const std::string& endpoint, std::function<void(std::optional<NodeId>)> done) {
    auto alive = alive_;
    rpc_.call(endpoint, Opcode::Ping, {}, config_.rpc_timeout, [this, alive, endpoint, done](net::Response r) {
        if (!*alive) return;
        if (!r.ok()) {
            done(std::nullopt);
            return;
        }
        observe(Contact{r.sender, endpoint});
        done(r.sender);
    });
}

void Dht::bootstrap(const std::vector<std::string>& seeds, std::function<void(bool)> done) {
    std::vector<std::string> others;
    for (const auto& s : seeds)
        if (s != rpc_.runtime().endpoint()) others.push_back(s);
    if (others.empty()) {
        joined_ = true;
        done(true);
        return;
    }
    auto remaining = std::make_shared<std::size_t>(others.size());
    auto alive = alive_;
    for (const auto& s : others) {
        ping(s, [this, alive, remaining, done](std::optional<NodeId>) {
            if (!*alive || --*remaining > 0) return;
            if (table_.size() == 0) {
                done(false);
                return;
            }
            find_node(rpc_.self(), [this, alive, done](Result<LookupResult> r) {
                if (!*alive) return;
                joined_ = r.ok() || table_.size() > 0;
                done(joined_);
            });
        });
    }
}

void Dht::iterative_lookup(const NodeId& target, LookupMode mode, LookupCallback done) {
    auto lk = std::make_shared<Lookup>();
    lk->target = target;
    lk->mode = mode;
    lk->done = std::move(done);
    const net::Time now = rpc_.runtime().now();
    store_.expire(now);
    Lookup::Candidate self_cand{self(), Lookup::State::Responded, 0};
    lk->candidates.emplace(xor_distance(rpc_.self(), target), self_cand);
    if (mode == LookupMode::Value)
        for (auto& v : store_.get(target, now))
            lk->values[{v.publisher, crypto::hash256("zephyr-dht-value", {v.value})}] = v;
    for (const auto& c : table_.closest(target, config_.k))
        lk->candidates.emplace(xor_distance(c.id, target), Lookup::Candidate{c, Lookup::State::Unqueried, 1});
    step(lk);
}

void Dht::step(const std::shared_ptr<Lookup>& lk) {
    if (lk->finished) return;
    using State = Lookup::State;
    std::size_t seen = 0;
    bool waiting = false;
    for (auto& [dist, cand] : lk->candidates) {
        if (seen >= config_.k) break;
        if (cand.state == State::Failed) continue;
        ++seen;
        if (cand.state == State::InFlight) {
            waiting = true;
            continue;
        }
        if (cand.state != State::Unqueried) continue;
        if (static_cast<std::size_t>(lk->inflight) >= config_.alpha) {
            waiting = true;
            continue;
        }
        cand.state = State::InFlight;
        ++lk->inflight;
        ++lk->result.queried;
        waiting = true;
        const Distance key = dist;
        const Contact contact = cand.contact;
        const int depth = cand.depth;
        const Opcode op = lk->mode == LookupMode::Value ? Opcode::FindValue : Opcode::FindNode;
        auto alive = alive_;
        rpc_.call(contact.endpoint, op, Bytes(lk->target.bytes.begin(), lk->target.bytes.end()), config_.rpc_timeout,
                  [this, alive, lk, key, contact, depth](net::Response r) {
                      if (!*alive || lk->finished) return;
                      --lk->inflight;
                      auto& c = lk->candidates.at(key);
                      bool good = r.ok() && r.sender == contact.id;
                      if (good) {
                          try {
                              wire::Reader rd(r.payload);
                              const net::Time now = rpc_.runtime().now();
                              if (lk->mode == LookupMode::Value) {
                                  const std::size_t at = rd.offset();
                                  const std::uint32_t n = rd.u32();
                                  if (n > 4096) throw MalformedError(at, "too many values");
                                  for (std::uint32_t i = 0; i < n; ++i) {
                                      DhtValue v;
                                      v.publisher = read_id(rd);
                                      const std::uint64_t ttl = rd.u64();
                                      v.value = rd.bytes(kMaxValueSize);
                                      v.expiry = now + static_cast<net::Duration>(
                                                           std::min<std::uint64_t>(ttl, 4 * config_.value_ttl));
                                      auto h = crypto::hash256("zephyr-dht-value", {v.value});
                                      lk->values.emplace(std::make_pair(v.publisher, h), std::move(v));
                                  }
                              }
                              for (auto& nc : read_contacts(rd, 4 * config_.k)) {
                                  if (nc.id == rpc_.self()) continue;
                                  lk->candidates.emplace(xor_distance(nc.id, lk->target),
                                                         Lookup::Candidate{nc, Lookup::State::Unqueried, depth + 1});
                              }
                              rd.finish();
                          } catch (const MalformedError&) {
                              good = false;
                          }
                      }
                      if (good) {
                          c.state = Lookup::State::Responded;
                          ++lk->result.responded;
                          lk->result.rounds = std::max(lk->result.rounds, depth);
                          observe(contact);
                      } else {
                          c.state = Lookup::State::Failed;
                          table_.remove(contact.id);
                      }
                      step(lk);
                  });
    }
    if (waiting) return;

    lk->finished = true;
    for (auto& [dist, cand] : lk->candidates) {
        if (lk->result.closest.size() >= config_.k) break;
        if (cand.state == State::Responded) lk->result.closest.push_back(cand.contact);
    }
    for (auto& [k, v] : lk->values) lk->result.values.push_back(std::move(v));
    Result<LookupResult> out;
    if (lk->result.queried > 0 && lk->result.responded == 0) {
        out.error = Errc::LookupFailed;
    } else {
        out.value = std::move(lk->result);
    }
    lk->done(std::move(out));
}

void Dht::find_value(const NodeId& key, std::function<void(Result<std::vector<DhtValue>>)> done) {
    iterative_lookup(key, LookupMode::Value, [done](Result<LookupResult> r) {
        Result<std::vector<DhtValue>> out;
        if (r.ok()) out.value = std::move(r.value->values);
        else out.error = r.error;
        done(std::move(out));
    });
}

void Dht::store(const NodeId& key, Bytes value, std::function<void(bool)> done, bool replace,
                std::optional<net::Duration> ttl) {
    if (value.size() > kMaxValueSize) throw Error(Errc::LengthError, "dht value exceeds 4 KiB");
    const net::Duration life = ttl.value_or(config_.value_ttl);
    auto alive = alive_;
    find_node(key, [this, alive, key, value = std::move(value), done, replace, life](Result<LookupResult> r) {
        if (!*alive) return;
        if (!r.ok()) {
            done(false);
            return;
        }
        auto targets = r.value->closest;
        auto pending = std::make_shared<std::size_t>(targets.size());
        auto stored = std::make_shared<std::size_t>(0);
        wire::Writer w;
        w.raw(key.bytes).raw(rpc_.self().bytes).u64(static_cast<std::uint64_t>(life)).u8(replace ? 1 : 0).bytes(value);
        const Bytes payload = std::move(w).take();
        for (const auto& c : targets) {
            if (c.id == rpc_.self()) {
                store_.put(key, rpc_.self(), value, rpc_.runtime().now() + life, replace);
                ++*stored;
                if (--*pending == 0) done(true);
                continue;
            }
            rpc_.call(c.endpoint, Opcode::Store, payload, config_.rpc_timeout,
                      [alive, pending, stored, done](net::Response resp) {
                          if (!*alive) return;
                          if (resp.ok()) ++*stored;
                          if (--*pending == 0) done(*stored > 0);
                      });
        }
    });
}

NodeId Dht::barrier_key(std::uint64_t round) {
    wire::Writer w;
    w.u64(round);
    return NodeId::of("readytomix", w.data());
}

void Dht::barrier_signal(std::uint64_t round, std::function<void(bool)> done, std::optional<net::Duration> ttl) {
    store(barrier_key(round), Bytes(rpc_.self().bytes.begin(), rpc_.self().bytes.end()), std::move(done), false,
          ttl);
}

void Dht::barrier_count(std::uint64_t round, std::function<void(Result<std::size_t>)> done) {
    find_value(barrier_key(round), [done](Result<std::vector<DhtValue>> r) {
        Result<std::size_t> out;
        if (!r.ok()) {
            out.error = r.error;
            done(out);
            return;
        }
        std::set<Bytes> distinct;
        for (const auto& v : *r.value) distinct.insert(v.value);
        out.value = distinct.size();
        done(out);
    });
}

}  // namespace zephyr::dht
