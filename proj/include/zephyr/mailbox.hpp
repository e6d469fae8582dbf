#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "zephyr/envelope.hpp"
#include "zephyr/net/rpc.hpp"
#include "zephyr/round_state.hpp"

namespace zephyr::mailbox {

using envelope::MailboxId;

struct MailboxRecord {
    MailboxId mailbox_id{};
    std::uint64_t seq = 0;
    std::uint64_t round = 0;
    Bytes blob;
    friend bool operator==(const MailboxRecord&, const MailboxRecord&) = default;
};

/// Largest accepted blob: a serialized SealedMessage in the biggest padding bucket.
std::size_t max_blob_size();

/// Column store contract shared by both backends. seq is monotone per mailbox
/// (gapless within a round); only the current round accepts appends; the
/// current and previous rounds are readable.
class MailboxStore {
public:
    virtual ~MailboxStore() = default;
    virtual std::uint64_t append(const MailboxId& id, std::uint64_t round, ByteView blob) = 0;
    virtual std::vector<MailboxRecord> fetch_all(const MailboxId& id, std::uint64_t round) const = 0;
    virtual std::size_t purge(std::uint64_t round) = 0;
    /// Moves the current round forward; earlier rounds stay readable per the rules above.
    virtual void set_round(std::uint64_t round) = 0;
    virtual std::uint64_t current_round() const = 0;
    virtual std::size_t record_count() const = 0;
    virtual std::size_t byte_size() const = 0;
};

/// In-memory columns; also the core of the durable backend.
class MemoryStore : public MailboxStore {
public:
    std::uint64_t append(const MailboxId& id, std::uint64_t round, ByteView blob) override;
    std::vector<MailboxRecord> fetch_all(const MailboxId& id, std::uint64_t round) const override;
    std::size_t purge(std::uint64_t round) override;
    void set_round(std::uint64_t round) override;
    std::uint64_t current_round() const override;
    std::size_t record_count() const override;
    std::size_t byte_size() const override;

    /// Replays a record verbatim (journal recovery); no round checks.
    void restore(const MailboxRecord& rec);

private:
    struct Column {
        std::uint64_t last_seq = 0;
        std::vector<MailboxRecord> records;
    };
    mutable std::mutex mu_;
    std::uint64_t round_ = 0;
    std::map<MailboxId, Column> columns_;
};

/// Durable backend: every mutation is appended to a journal file before it is
/// acknowledged; opening an existing journal replays it.
class LogStore : public MailboxStore {
public:
    explicit LogStore(std::filesystem::path path);

    std::uint64_t append(const MailboxId& id, std::uint64_t round, ByteView blob) override;
    std::vector<MailboxRecord> fetch_all(const MailboxId& id, std::uint64_t round) const override;
    std::size_t purge(std::uint64_t round) override;
    void set_round(std::uint64_t round) override;
    std::uint64_t current_round() const override { return core_.current_round(); }
    std::size_t record_count() const override { return core_.record_count(); }
    std::size_t byte_size() const override { return core_.byte_size(); }

private:
    void replay();
    void write_entry(ByteView entry);

    std::filesystem::path path_;
    std::mutex write_mu_;
    std::ofstream out_;
    MemoryStore core_;
};

/// APPEND: u64 round | u32 n | n x (mailbox id, bytes blob)  ->  u32 n | n x u64 seq (0 = rejected)
/// FETCH_ALL: mailbox id | u64 round  ->  u32 n | n x (u64 seq, bytes blob)
/// PURGE: u64 round  ->  u64 count
struct AppendItem {
    MailboxId mailbox_id{};
    Bytes blob;
};
Bytes encode_append(std::uint64_t round, const std::vector<AppendItem>& items);
Bytes encode_fetch(const MailboxId& id, std::uint64_t round);
std::vector<MailboxRecord> decode_fetch_response(const MailboxId& id, std::uint64_t round, ByteView payload);

/// Network face of a store. Appends are accepted only from directory mixers.
class MailboxServer {
public:
    MailboxServer(net::Rpc& rpc, Authority& authority, MailboxStore& store);

    bool on_open(const RoundState& state);
    std::uint64_t appends() const { return appends_; }
    std::uint64_t fetches() const { return fetches_; }
    std::size_t memory_estimate() const { return sizeof(*this) + store_.byte_size(); }

private:
    net::Rpc& rpc_;
    Authority& authority_;
    MailboxStore& store_;
    std::uint64_t appends_ = 0;
    std::uint64_t fetches_ = 0;
};

}  // namespace zephyr::mailbox
