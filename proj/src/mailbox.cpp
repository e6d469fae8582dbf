#include "zephyr/mailbox.hpp"

#include <algorithm>

#include "zephyr/info_node.hpp"
#include "zephyr/wire.hpp"

namespace zephyr::mailbox {

namespace {

enum class Entry : std::uint8_t { Append = 1, Purge = 2, Round = 3 };

constexpr std::size_t kMaxBatch = 1 << 16;

bool readable(std::uint64_t current, std::uint64_t round) {
    return round != 0 && (round == current || round + 1 == current);
}

}  // namespace

std::size_t max_blob_size() { return envelope::max_sealed_size(crypto::CurvePreset::TypeA1536); }

// ---------------------------------------------------------------------------
// MemoryStore

std::uint64_t MemoryStore::append(const MailboxId& id, std::uint64_t round, ByteView blob) {
    if (blob.size() > max_blob_size()) throw Error(Errc::BlobTooLarge, "blob exceeds the largest bucket");
    std::lock_guard lock(mu_);
    if (round != round_)
        throw Error(Errc::WrongRound, "append for round " + std::to_string(round) + ", current round is " +
                                          std::to_string(round_));
    auto& col = columns_[id];
    MailboxRecord rec{id, ++col.last_seq, round, Bytes(blob.begin(), blob.end())};
    col.records.push_back(std::move(rec));
    return col.last_seq;
}

std::vector<MailboxRecord> MemoryStore::fetch_all(const MailboxId& id, std::uint64_t round) const {
    std::lock_guard lock(mu_);
    if (!readable(round_, round)) throw Error(Errc::UnknownRound, "round " + std::to_string(round) + " not retained");
    std::vector<MailboxRecord> out;
    auto it = columns_.find(id);
    if (it == columns_.end()) return out;
    for (const auto& r : it->second.records)
        if (r.round == round) out.push_back(r);
    return out;
}

std::size_t MemoryStore::purge(std::uint64_t round) {
    std::lock_guard lock(mu_);
    if (round + 1 >= round_) return 0;
    std::size_t n = 0;
    for (auto& [id, col] : columns_)
        n += std::erase_if(col.records, [&](const MailboxRecord& r) { return r.round == round; });
    return n;
}

void MemoryStore::set_round(std::uint64_t round) {
    std::lock_guard lock(mu_);
    if (round < round_) throw Error(Errc::StaleRound, "mailbox round cannot move backwards");
    round_ = round;
}

std::uint64_t MemoryStore::current_round() const {
    std::lock_guard lock(mu_);
    return round_;
}

std::size_t MemoryStore::record_count() const {
    std::lock_guard lock(mu_);
    std::size_t n = 0;
    for (const auto& [id, col] : columns_) n += col.records.size();
    return n;
}

std::size_t MemoryStore::byte_size() const {
    std::lock_guard lock(mu_);
    std::size_t n = 0;
    for (const auto& [id, col] : columns_)
        for (const auto& r : col.records) n += sizeof(MailboxRecord) + r.blob.size();
    return n;
}

void MemoryStore::restore(const MailboxRecord& rec) {
    std::lock_guard lock(mu_);
    auto& col = columns_[rec.mailbox_id];
    col.last_seq = std::max(col.last_seq, rec.seq);
    col.records.push_back(rec);
}

// ---------------------------------------------------------------------------
// LogStore

LogStore::LogStore(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    replay();
    out_.open(path_, std::ios::binary | std::ios::app);
    if (!out_) throw Error(Errc::Io, "cannot open mailbox journal " + path_.string());
}

void LogStore::replay() {
    std::ifstream in(path_, std::ios::binary);
    if (!in) return;
    Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::size_t pos = 0;
    while (data.size() - pos >= 4) {
        wire::Reader len(ByteView(data).subspan(pos, 4));
        const std::uint32_t n = len.u32();
        if (data.size() - pos - 4 < n) break;
        wire::Reader r(ByteView(data).subspan(pos + 4, n));
        switch (static_cast<Entry>(r.u8())) {
            case Entry::Append: {
                MailboxRecord rec;
                rec.mailbox_id = r.array<32>();
                rec.seq = r.u64();
                rec.round = r.u64();
                rec.blob = r.bytes();
                core_.restore(rec);
                break;
            }
            case Entry::Purge: core_.purge(r.u64()); break;
            case Entry::Round: core_.set_round(r.u64()); break;
            default: throw MalformedError(pos + 4, "unknown journal entry");
        }
        r.finish();
        pos += 4 + n;
    }
    if (pos != data.size()) std::filesystem::resize_file(path_, pos);
}

void LogStore::write_entry(ByteView entry) {
    wire::Writer w;
    w.bytes(entry);
    out_.write(reinterpret_cast<const char*>(w.data().data()), static_cast<std::streamsize>(w.size()));
    out_.flush();
    if (!out_) throw Error(Errc::Io, "mailbox journal write failed");
}

std::uint64_t LogStore::append(const MailboxId& id, std::uint64_t round, ByteView blob) {
    std::lock_guard lock(write_mu_);
    const std::uint64_t seq = core_.append(id, round, blob);
    wire::Writer w;
    w.u8(static_cast<std::uint8_t>(Entry::Append)).raw(id).u64(seq).u64(round).bytes(blob);
    write_entry(w.data());
    return seq;
}

std::vector<MailboxRecord> LogStore::fetch_all(const MailboxId& id, std::uint64_t round) const {
    return core_.fetch_all(id, round);
}

std::size_t LogStore::purge(std::uint64_t round) {
    std::lock_guard lock(write_mu_);
    const std::size_t n = core_.purge(round);
    if (n > 0) {
        wire::Writer w;
        w.u8(static_cast<std::uint8_t>(Entry::Purge)).u64(round);
        write_entry(w.data());
    }
    return n;
}

void LogStore::set_round(std::uint64_t round) {
    std::lock_guard lock(write_mu_);
    if (round == core_.current_round()) return;
    core_.set_round(round);
    wire::Writer w;
    w.u8(static_cast<std::uint8_t>(Entry::Round)).u64(round);
    write_entry(w.data());
}

// ---------------------------------------------------------------------------
// Wire

Bytes encode_append(std::uint64_t round, const std::vector<AppendItem>& items) {
    wire::Writer w;
    w.u64(round).u32(static_cast<std::uint32_t>(items.size()));
    for (const auto& it : items) w.raw(it.mailbox_id).bytes(it.blob);
    return std::move(w).take();
}

Bytes encode_fetch(const MailboxId& id, std::uint64_t round) {
    wire::Writer w;
    w.raw(id).u64(round);
    return std::move(w).take();
}

std::vector<MailboxRecord> decode_fetch_response(const MailboxId& id, std::uint64_t round, ByteView payload) {
    wire::Reader r(payload);
    const std::size_t at = r.offset();
    const std::uint32_t n = r.u32();
    if (n > kMaxBatch) throw MalformedError(at, "too many records");
    std::vector<MailboxRecord> out;
    out.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        MailboxRecord rec;
        rec.mailbox_id = id;
        rec.round = round;
        rec.seq = r.u64();
        rec.blob = r.bytes(max_blob_size());
        out.push_back(std::move(rec));
    }
    r.finish();
    return out;
}

// ---------------------------------------------------------------------------
// MailboxServer

MailboxServer::MailboxServer(net::Rpc& rpc, Authority& authority, MailboxStore& store)
    : rpc_(rpc), authority_(authority), store_(store) {
    rpc_.on(net::Opcode::Append, [this](const net::Request& req, net::Responder resp) {
        const auto& cur = authority_.current();
        if (!cur || !cur->directory.find_mixer(req.sender))
            throw Error(Errc::Rejected, "appends are accepted from directory mixers only");
        wire::Reader r(req.payload);
        const std::uint64_t round = r.u64();
        const std::size_t at = r.offset();
        const std::uint32_t n = r.u32();
        if (n > kMaxBatch) throw MalformedError(at, "batch too large");
        std::vector<AppendItem> items(n);
        for (auto& it : items) {
            it.mailbox_id = r.array<32>();
            it.blob = r.bytes();
        }
        r.finish();
        if (round != store_.current_round())
            throw Error(Errc::WrongRound, "current round is " + std::to_string(store_.current_round()));
        wire::Writer w;
        w.u32(n);
        for (const auto& it : items) {
            std::uint64_t seq = 0;
            try {
                seq = store_.append(it.mailbox_id, round, it.blob);
                ++appends_;
            } catch (const Error& e) {
                if (e.code() != Errc::BlobTooLarge) throw;
            }
            w.u64(seq);
        }
        resp.ok(std::move(w).take());
    });
    rpc_.on(net::Opcode::FetchAll, [this](const net::Request& req, net::Responder resp) {
        wire::Reader r(req.payload);
        const MailboxId id = r.array<32>();
        const std::uint64_t round = r.u64();
        r.finish();
        const auto records = store_.fetch_all(id, round);
        ++fetches_;
        wire::Writer w;
        w.u32(static_cast<std::uint32_t>(records.size()));
        for (const auto& rec : records) w.u64(rec.seq).bytes(rec.blob);
        resp.ok(std::move(w).take());
    });
    rpc_.on(net::Opcode::Purge, [this](const net::Request& req, net::Responder resp) {
        wire::Reader r(req.payload);
        const std::uint64_t round = r.u64();
        r.finish();
        wire::Writer w;
        w.u64(store_.purge(round));
        resp.ok(std::move(w).take());
    });
    rpc_.on(net::Opcode::OpenRound, [this](const net::Request& req, net::Responder resp) {
        const auto open = info::deserialize_open(req.payload);
        if (digest_mpk(open.mpk) != open.state.mpk_digest || !on_open(open.state))
            throw Error(Errc::Rejected, "round state rejected");
        resp.ok();
    });
}

bool MailboxServer::on_open(const RoundState& state) {
    if (!authority_.accept(state)) return false;
    const std::uint64_t before = store_.current_round();
    if (state.round > before) {
        store_.set_round(state.round);
        for (std::uint64_t r = before > 1 ? before - 1 : 1; r + 1 < state.round; ++r) store_.purge(r);
    }
    return true;
}

}  // namespace zephyr::mailbox
