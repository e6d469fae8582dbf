#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "zephyr/bytes.hpp"
#include "zephyr/crypto/hash.hpp"
#include "zephyr/crypto/sign.hpp"
#include "zephyr/envelope.hpp"
#include "zephyr/node_id.hpp"

namespace zephyr {

struct MixerEntry {
    NodeId id;
    std::string endpoint;
    crypto::SignPublicKey sign_key{};
    friend bool operator==(const MixerEntry&, const MixerEntry&) = default;
};

/// Per-round membership published by the coordinator.
struct Directory {
    std::vector<MixerEntry> mixers;  // sorted by id
    std::vector<std::string> info_nodes;
    std::vector<std::string> mailbox_servers;
    std::uint32_t mailbox_count = 16;
    std::string pkg_endpoint;
    ByteArray<32> salt{};
    std::uint64_t round_duration = 0;  // microseconds

    const MixerEntry* find_mixer(const NodeId& id) const;
    const MixerEntry* find_mixer_by_key(const crypto::SignPublicKey& key) const;
    friend bool operator==(const Directory&, const Directory&) = default;
};

enum class RoundPhase : std::uint8_t { Open = 0, Mixing = 1, Closing = 2, Rotating = 3 };
const char* phase_name(RoundPhase p);

struct RoundState {
    std::uint64_t round = 0;
    Directory directory;
    RoundPhase phase = RoundPhase::Open;
    NodeId coordinator;
    std::string coordinator_endpoint;
    NodeId last_mixer;
    crypto::Digest32 mpk_digest{};
    crypto::SignPublicKey signer{};
    crypto::Signature signature{};

    /// Canonical encoding of every field except the signature.
    Bytes signed_bytes() const;
    void sign(const crypto::SigningKey& key);
    bool signature_valid() const;
    friend bool operator==(const RoundState&, const RoundState&) = default;
};

void write_round_state(wire::Writer& w, const RoundState& s);
RoundState read_round_state(wire::Reader& r);
Bytes serialize(const RoundState& s);
RoundState deserialize_round_state(ByteView b);

/// Coordinator order (CLOSE, ROTATE, ...) bound to a round and signed.
struct SignedCommand {
    std::string what;
    std::uint64_t round = 0;
    NodeId issuer;
    crypto::SignPublicKey signer{};
    crypto::Signature signature{};

    static SignedCommand make(std::string what, std::uint64_t round, const NodeId& issuer,
                              const crypto::SigningKey& key);
    Bytes signed_bytes() const;
    bool signature_valid() const;
};

Bytes serialize(const SignedCommand& c);
SignedCommand deserialize_command(ByteView b);

/// Tracks the latest accepted RoundState. Signatures are accepted from the
/// pinned coordinator key, or from a mixer of the accepted directory (failover
/// substitute).
class Authority {
public:
    explicit Authority(crypto::SignPublicKey pinned) : pinned_(pinned) {}

    bool trusted_signer(const crypto::SignPublicKey& key) const;
    /// Verifies and adopts; rejects bad signatures and rounds older than the current one.
    bool accept(const RoundState& s);
    bool verify(const SignedCommand& c, std::string_view expected_what) const;

    const std::optional<RoundState>& current() const { return current_; }
    const std::optional<RoundState>& previous() const { return previous_; }
    std::uint64_t round() const { return current_ ? current_->round : 0; }
    const crypto::SignPublicKey& pinned() const { return pinned_; }
    void reset() {
        current_.reset();
        previous_.reset();
    }

private:
    crypto::SignPublicKey pinned_;
    std::optional<RoundState> current_;
    std::optional<RoundState> previous_;
};

/// Digest of serialized IBE public parameters, carried in the signed RoundState.
crypto::Digest32 digest_mpk(ByteView mpk);

/// mailbox index = PRNG(hash(identity || round || salt)) mod mailbox_count
std::uint32_t mailbox_index(std::string_view identity, std::uint64_t round, const ByteArray<32>& salt,
                            std::uint32_t mailbox_count);
envelope::MailboxId mailbox_id_for(std::uint32_t index, const ByteArray<32>& salt);
/// Mailbox index i lives on server i mod |servers|.
envelope::Address mailbox_address(const Directory& d, std::uint32_t index);
envelope::Address mixer_address(const std::string& endpoint);

}  // namespace zephyr
