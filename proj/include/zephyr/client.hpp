#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "zephyr/crypto/ibe.hpp"
#include "zephyr/envelope.hpp"
#include "zephyr/info_node.hpp"
#include "zephyr/net/rpc.hpp"
#include "zephyr/result.hpp"
#include "zephyr/round_state.hpp"

namespace zephyr::client {

/// Reads the most recent authentication code mailed to an identity.
using CodeSource = std::function<std::optional<std::string>(const std::string& identity)>;

struct ClientConfig {
    std::string identity;
    std::vector<std::string> info_nodes;
    crypto::SignPublicKey pinned{};
    net::Duration poll_interval = net::ms(250);
    net::Duration call_timeout = net::seconds(2);
    net::Duration code_poll = net::ms(100);
    int code_attempts = 50;
    std::size_t max_route = 5;
};

/// Everything needed to send and receive in one round.
struct ClientSession {
    std::string identity;
    std::uint64_t round = 0;
    crypto::IdentityPrivateKey own_key;
    info::KeyBundle bundle;
    std::uint32_t mailbox_index = 0;
    envelope::MailboxId mailbox_id{};
};

Bytes serialize(const ClientSession& s);
ClientSession deserialize_session(ByteView b);

struct SendReceipt {
    std::size_t route_length = 0;
    std::size_t padded_size = 0;
};

struct Delivered {
    Bytes plaintext;
    std::uint64_t round = 0;
};

/// Checks a bundle against the pinned coordinator key, the mpk digest and the
/// directory; adopts its state into `authority` on success.
Result<bool> verify_bundle(Authority& authority, const info::KeyBundle& b);

/// Route: length uniform in [2, min(max_route, |mixers|)] (1 with a single
/// mixer), taken as a Fisher-Yates prefix over the bundle's mixers.
std::vector<std::size_t> choose_route(std::size_t mixers, std::size_t max_route, crypto::Rng& rng);

class Client {
public:
    Client(net::Rpc& rpc, ClientConfig config, CodeSource codes);
    ~Client();
    Client(const Client&) = delete;
    Client& operator=(const Client&) = delete;

    /// Latest verified bundle from a uniformly random info node.
    void fetch_bundle(std::function<void(Result<info::KeyBundle>)> done);
    /// Authenticates for the latest round and installs the resulting session.
    void enroll(std::function<void(Result<bool>)> done);
    void send(const std::string& recipient, ByteView message, std::function<void(Result<SendReceipt>)> done);
    /// Downloads the session's mailbox and returns every record that opens.
    void fetch_round(const ClientSession& session, std::function<void(Result<std::vector<Delivered>>)> done);

    /// Autopilot: poll for rounds; on each new round fetch the previous
    /// mailbox, enroll, and send everything queued.
    void start();
    void stop();
    void queue(std::string recipient, Bytes message);

    const ClientSession* session() const { return session_ ? &*session_ : nullptr; }
    void install(ClientSession s);
    const std::vector<Delivered>& inbox() const { return inbox_; }
    const std::string& identity() const { return config_.identity; }
    std::uint64_t sent() const { return sent_; }
    std::uint64_t send_failures() const { return send_failures_; }
    std::size_t memory_estimate() const;

    std::function<void(std::uint64_t round)> on_enrolled;
    std::function<void(std::uint64_t round, const std::vector<Delivered>&)> on_fetched;

private:
    void begin_auth(std::function<void(Result<bool>)> done, info::KeyBundle bundle);
    void await_code(std::function<void(Result<bool>)> done, info::KeyBundle bundle, int attempt);
    void poll();
    void on_round(info::KeyBundle bundle);
    void flush();
    const crypto::IbeRecipient& recipient_for(const std::string& identity);
    const std::string& pick_info() ;

    net::Rpc& rpc_;
    ClientConfig config_;
    CodeSource codes_;
    Authority authority_;
    std::shared_ptr<bool> alive_;

    std::optional<ClientSession> session_;
    std::optional<crypto::MasterPublicKey> mpk_;
    std::map<std::string, crypto::IbeRecipient> recipients_;
    std::vector<Delivered> inbox_;
    std::deque<std::pair<std::string, Bytes>> outbox_;
    bool running_ = false;
    bool busy_ = false;
    std::uint64_t sent_ = 0;
    std::uint64_t send_failures_ = 0;
};

}  // namespace zephyr::client
