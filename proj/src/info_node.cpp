#include "zephyr/info_node.hpp"

#include <algorithm>

#include "zephyr/wire.hpp"

namespace zephyr::info {

namespace {

constexpr std::size_t kMaxRecords = 4096;

void write_record(wire::Writer& w, const MixerKeyRecord& r) {
    w.raw(r.mixer_id.bytes).u64(r.round).raw(r.public_key);
    envelope::write_address(w, r.address);
    w.u64(r.published_at);
}

MixerKeyRecord read_record(wire::Reader& r) {
    MixerKeyRecord rec;
    rec.mixer_id.bytes = r.array<NodeId::kBytes>();
    rec.round = r.u64();
    rec.public_key = r.array<envelope::kKemKeySize>();
    const std::size_t at = r.offset();
    rec.address = envelope::read_address(r);
    if (rec.address.kind != envelope::AddressKind::Mixer) throw MalformedError(at, "record address must be a mixer");
    rec.published_at = r.u64();
    return rec;
}

std::string list_ids(const std::vector<NodeId>& ids) {
    std::string out;
    for (const auto& id : ids) {
        if (!out.empty()) out += ",";
        out += id.hex();
    }
    return out;
}

}  // namespace

Bytes serialize(const MixerKeyRecord& r) {
    wire::Writer w;
    w.version();
    write_record(w, r);
    return std::move(w).take();
}

MixerKeyRecord deserialize_record(ByteView b) {
    wire::Reader r(b);
    r.version();
    auto rec = read_record(r);
    r.finish();
    return rec;
}

Bytes serialize(const KeyBundle& b) {
    wire::Writer w;
    w.version().u64(b.round).u32(static_cast<std::uint32_t>(b.records.size()));
    for (const auto& r : b.records) write_record(w, r);
    w.bytes(b.mpk);
    write_round_state(w, b.state);
    return std::move(w).take();
}

KeyBundle deserialize_bundle(ByteView bytes) {
    wire::Reader r(bytes);
    r.version();
    KeyBundle b;
    b.round = r.u64();
    const std::size_t at = r.offset();
    const std::uint32_t n = r.u32();
    if (n > kMaxRecords) throw MalformedError(at, "too many records");
    for (std::uint32_t i = 0; i < n; ++i) {
        const std::size_t rec_at = r.offset();
        auto rec = read_record(r);
        if (!b.records.empty() && !(b.records.back().mixer_id < rec.mixer_id))
            throw MalformedError(rec_at, "records not in canonical order");
        b.records.push_back(std::move(rec));
    }
    b.mpk = r.bytes(64 * 1024);
    b.state = read_round_state(r);
    r.finish();
    return b;
}

NodeId record_key(const NodeId& mixer_id, std::uint64_t round) {
    wire::Writer w;
    w.raw(mixer_id.bytes).u64(round);
    return NodeId::of("mixer-key", w.data());
}

Bytes serialize(const OpenRound& o) {
    wire::Writer w;
    w.version();
    write_round_state(w, o.state);
    w.bytes(o.mpk);
    return std::move(w).take();
}

OpenRound deserialize_open(ByteView b) {
    wire::Reader r(b);
    r.version();
    OpenRound o;
    o.state = read_round_state(r);
    o.mpk = r.bytes(64 * 1024);
    r.finish();
    return o;
}

Bytes encode_fetch_request(std::uint64_t round, std::uint64_t newer_than) {
    wire::Writer w;
    w.u64(round).u64(newer_than);
    return std::move(w).take();
}

InfoNode::InfoNode(net::Rpc& rpc, dht::Dht& dht, Authority& authority)
    : rpc_(rpc), dht_(dht), authority_(authority), alive_(std::make_shared<bool>(true)) {
    rpc_.on(net::Opcode::PublishKey, [this](const net::Request& req, net::Responder resp) {
        auto rec = deserialize_record(req.payload);
        if (rec.mixer_id != req.sender) throw Error(Errc::Rejected, "record does not belong to the sender");
        publish_key(rec);
        resp.ok();
    });
    rpc_.on(net::Opcode::FetchBundle,
            [this](const net::Request& req, net::Responder resp) { handle_fetch(req, std::move(resp)); });
    rpc_.on(net::Opcode::OpenRound, [this](const net::Request& req, net::Responder resp) {
        if (!on_open(deserialize_open(req.payload))) throw Error(Errc::Rejected, "round state rejected");
        resp.ok();
    });
}

InfoNode::~InfoNode() { *alive_ = false; }

void InfoNode::publish_key(const MixerKeyRecord& record) {
    if (record.address.kind != envelope::AddressKind::Mixer)
        throw Error(Errc::InvalidArgument, "record address must be a mixer");
    if (record.round < authority_.round())
        throw Error(Errc::StaleRound, "record for round " + std::to_string(record.round) + " behind current round " +
                                          std::to_string(authority_.round()));
    records_[{record.round, record.mixer_id}] = record;
    ++publications_;
    dht_.store(record_key(record.mixer_id, record.round), serialize(record), [](bool) {}, true);
}

bool InfoNode::on_open(const OpenRound& open) {
    if (digest_mpk(open.mpk) != open.state.mpk_digest) return false;
    if (!authority_.accept(open.state)) return false;
    rounds_[open.state.round] = RoundData{open.state, open.mpk};
    const std::uint64_t keep_from = open.state.round > 0 ? open.state.round - 1 : 0;
    std::erase_if(rounds_, [&](const auto& kv) { return kv.first < keep_from; });
    std::erase_if(records_, [&](const auto& kv) { return kv.first.first < keep_from; });
    fetch_bundle(open.state.round, [](Result<KeyBundle>) {});
    return true;
}

std::optional<KeyBundle> InfoNode::assemble(std::uint64_t round, std::vector<NodeId>* missing) const {
    auto it = rounds_.find(round);
    if (it == rounds_.end()) return std::nullopt;
    KeyBundle b;
    b.round = round;
    b.mpk = it->second.mpk;
    b.state = it->second.state;
    for (const auto& m : b.state.directory.mixers) {
        auto rec = records_.find({round, m.id});
        if (rec == records_.end()) {
            if (missing) missing->push_back(m.id);
            continue;
        }
        b.records.push_back(rec->second);
    }
    if (missing && !missing->empty()) return std::nullopt;
    return b;
}

void InfoNode::fetch_bundle(std::uint64_t round, std::function<void(Result<KeyBundle>)> done) {
    if (round == kLatestRound) {
        if (rounds_.empty()) return done(Result<KeyBundle>::failure(Errc::UnknownRound, "no round is open"));
        round = rounds_.rbegin()->first;
    }
    if (!rounds_.count(round))
        return done(Result<KeyBundle>::failure(Errc::UnknownRound, "round " + std::to_string(round) + " unknown"));
    std::vector<NodeId> missing;
    if (auto b = assemble(round, &missing)) return done(Result<KeyBundle>::success(std::move(*b)));

    auto alive = alive_;
    auto pending = std::make_shared<std::size_t>(missing.size());
    for (const auto& id : missing) {
        dht_.find_value(record_key(id, round), [this, alive, id, round, pending, done](auto r) {
            if (!*alive) return;
            if (r.ok()) {
                std::optional<MixerKeyRecord> best;
                for (const auto& v : *r.value) {
                    try {
                        auto rec = deserialize_record(v.value);
                        if (rec.mixer_id != id || rec.round != round) continue;
                        if (!best || rec.published_at > best->published_at) best = rec;
                    } catch (const MalformedError&) {
                    }
                }
                if (best) records_[{round, id}] = *best;
            }
            if (--*pending > 0) return;
            std::vector<NodeId> still;
            if (auto b = assemble(round, &still)) return done(Result<KeyBundle>::success(std::move(*b)));
            if (!rounds_.count(round))
                return done(Result<KeyBundle>::failure(Errc::UnknownRound, "round " + std::to_string(round) + " unknown"));
            done(Result<KeyBundle>::failure(Errc::IncompleteBundle, "missing mixers: " + list_ids(still)));
        });
    }
}

void InfoNode::handle_fetch(const net::Request& req, net::Responder resp) {
    wire::Reader r(req.payload);
    const std::uint64_t round = r.u64();
    const std::uint64_t newer_than = r.u64();
    r.finish();
    ++fetches_;
    if (round == kLatestRound && !rounds_.empty() && rounds_.rbegin()->first <= newer_than) {
        resp.ok(Bytes{1});
        return;
    }
    fetch_bundle(round, [resp](Result<KeyBundle> b) mutable {
        if (!b.ok()) return resp.fail(b.error, b.message);
        Bytes out{0};
        append(out, serialize(*b.value));
        resp.ok(std::move(out));
    });
}

void InfoNode::reset() {
    *alive_ = false;
    alive_ = std::make_shared<bool>(true);
    rounds_.clear();
    records_.clear();
}

std::size_t InfoNode::memory_estimate() const {
    std::size_t total = sizeof(*this);
    for (const auto& [r, d] : rounds_) total += d.mpk.size() + serialize(d.state).size();
    total += records_.size() * (sizeof(MixerKeyRecord) + 64);
    return total + dht_.local_store().byte_size();
}

}  // namespace zephyr::info
