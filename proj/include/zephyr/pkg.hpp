#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "zephyr/crypto/ibe.hpp"
#include "zephyr/net/rpc.hpp"
#include "zephyr/round_state.hpp"

namespace zephyr::pkg {

/// Outbound mail capability; the PKG never talks SMTP itself.
class EmailTransport {
public:
    virtual ~EmailTransport() = default;
    virtual void send(const std::string& address, const std::string& body) = 0;
};

/// Test transport: records every message.
class InMemoryEmail : public EmailTransport {
public:
    struct Message {
        std::string address;
        std::string body;
    };
    void send(const std::string& address, const std::string& body) override;
    std::vector<Message> messages() const;
    /// Code from the most recent message to `address`.
    std::optional<std::string> last_code(const std::string& address) const;

private:
    mutable std::mutex mu_;
    std::vector<Message> messages_;
};

/// Appends each message to <dir>/<address>.txt (one message per line).
class FileOutbox : public EmailTransport {
public:
    explicit FileOutbox(std::filesystem::path dir);
    void send(const std::string& address, const std::string& body) override;
    static std::optional<std::string> last_code(const std::filesystem::path& dir, const std::string& address);

private:
    std::filesystem::path dir_;
    std::mutex mu_;
};

/// Extracts the six-digit code from a message body.
std::optional<std::string> code_from_body(const std::string& body);

bool valid_email(std::string_view address);

struct PkgConfig {
    crypto::CurvePreset preset = crypto::CurvePreset::TypeA1536;
    std::int64_t code_ttl = 10 * 60 * 1000000LL;  // microseconds
    int max_attempts = 5;
    int max_challenges_per_round = 3;
};

struct AuthChallenge {
    std::string identity;
    std::string code;
    std::int64_t issued_at = 0;
    int attempts = 0;
    bool dead = false;
};

struct Enrollment {
    std::uint64_t round = 0;
    crypto::IdentityPrivateKey key;
    Bytes mpk;
};

/// Challenge table and master key. Every call takes the current time so the
/// same code runs on the virtual and the wall clock.
class PkgCore {
public:
    PkgCore(PkgConfig config, crypto::Rng& rng, EmailTransport& email);

    /// Fresh master for `round`; the previous master secret is dropped.
    const crypto::MasterPublicKey& rotate_master(std::uint64_t round);
    void begin_auth(std::string_view identity, std::int64_t now);
    /// Throws Rejected, uniformly, for a wrong code, an expired challenge or exhausted attempts.
    Enrollment complete_auth(std::string_view identity, std::string_view code, std::int64_t now);
    /// Canonical bytes of the current public parameters.
    const Bytes& serve_params() const;

    bool initialized() const { return master_.has_value(); }
    std::uint64_t round() const { return round_; }
    const crypto::MasterPublicKey& mpk() const;
    std::size_t challenge_count() const;
    /// Test-only view of the master scalar, for the leak scan.
    Bytes master_secret_bytes() const;
    const PkgConfig& config() const { return config_; }

private:
    PkgConfig config_;
    crypto::Rng& rng_;
    EmailTransport& email_;
    mutable std::mutex mu_;
    std::optional<crypto::MasterKeyPair> master_;
    Bytes params_;
    std::uint64_t round_ = 0;
    std::map<std::string, AuthChallenge> challenges_;
    std::map<std::string, int> issued_this_round_;
};

/// BEGIN_AUTH: str identity  ->  empty
/// COMPLETE_AUTH: str identity | str code  ->  u64 round | bytes key | bytes mpk
/// SERVE_PARAMS: u8 text  ->  raw bytes, or base64 text when text = 1
/// ROTATE_MASTER: SignedCommand("rotate-master", round)  ->  u64 round | bytes mpk
Bytes encode_begin_auth(std::string_view identity);
Bytes encode_complete_auth(std::string_view identity, std::string_view code);
Enrollment decode_enrollment(ByteView payload);

class PkgServer {
public:
    PkgServer(net::Rpc& rpc, Authority& authority, PkgCore& core);
    std::uint64_t requests() const { return requests_; }
    std::size_t memory_estimate() const;

private:
    net::Rpc& rpc_;
    Authority& authority_;
    PkgCore& core_;
    std::uint64_t requests_ = 0;
};

}  // namespace zephyr::pkg
