#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "zephyr/bytes.hpp"
#include "zephyr/crypto/hash.hpp"
#include "zephyr/crypto/ibe.hpp"
#include "zephyr/crypto/rng.hpp"
#include "zephyr/crypto/secretbox.hpp"
#include "zephyr/node_id.hpp"
#include "zephyr/wire.hpp"

namespace zephyr::envelope {

using MailboxId = ByteArray<32>;

enum class AddressKind : std::uint8_t { Mixer = 0, Mailbox = 1 };

struct Address {
    AddressKind kind = AddressKind::Mixer;
    std::string host;
    std::uint16_t port = 0;
    MailboxId mailbox_id{};  // Mailbox kind only

    static Address mixer(std::string host, std::uint16_t port) {
        return Address{AddressKind::Mixer, std::move(host), port, {}};
    }
    static Address mailbox(std::string host, std::uint16_t port, const MailboxId& id) {
        return Address{AddressKind::Mailbox, std::move(host), port, id};
    }

    std::string endpoint() const { return host + ":" + std::to_string(port); }
    friend bool operator==(const Address&, const Address&) = default;
    friend auto operator<=>(const Address&, const Address&) = default;
};

/// Recipient-layer triple: IBE-encrypted digest, nonce, and the message
/// encrypted under that digest.
struct SealedMessage {
    crypto::CurvePreset preset = crypto::CurvePreset::TypeA1536;
    crypto::IbeCiphertext enc_digest;
    crypto::SymNonce nonce{};
    Bytes body;

    friend bool operator==(const SealedMessage&, const SealedMessage&) = default;
};

// Message padding buckets; each padded message is u32 length || message || zeros.
inline constexpr std::size_t kBuckets[] = {1024, 4096, 16384};
inline constexpr std::size_t kMaxPaddedSize = 16384;
inline constexpr std::size_t kMaxMessageSize = kMaxPaddedSize - 4;

std::size_t bucket_for(std::size_t message_size);
Bytes pad_message(ByteView message);
/// Throws MalformedError for anything pad_message could not have produced.
Bytes unpad_message(ByteView padded);

/// Digest used as the symmetric key: BLAKE2b-256 tagged "zephyr-seal".
crypto::Digest32 message_digest(ByteView message);

SealedMessage seal_to_recipient(const crypto::MasterPublicKey& mpk, std::string_view recipient_identity,
                                ByteView message, crypto::Rng& rng);

SealedMessage seal_to_recipient(const crypto::IbeRecipient& recipient, ByteView message, crypto::Rng& rng);

/// nullopt means "not mine": wrong recipient, wrong round key, or tampering.
std::optional<Bytes> open_as_recipient(const crypto::IdentityPrivateKey& sk, const SealedMessage& sealed);

// ---------------------------------------------------------------------------
// Onion layers

inline constexpr std::size_t kKemKeySize = 32;
using KemPublicKey = ByteArray<kKemKeySize>;
using KemSecretKey = ByteArray<kKemKeySize>;

struct MixerKeyPair {
    KemPublicKey public_key{};
    KemSecretKey secret_key{};
    NodeId mixer_id;

    static MixerKeyPair generate(crypto::Rng& rng, const NodeId& mixer_id);
    void erase_secret();
};

struct RouteHop {
    Address address;  // Mixer kind
    KemPublicKey public_key{};
};

using OnionPacket = Bytes;

/// Layer: version || ephemeral public key || nonce || sym ciphertext of (next address, inner).
inline constexpr std::size_t kLayerOverhead = 1 + kKemKeySize + crypto::kSymNonceSize + crypto::kSymTagSize;

OnionPacket onion_wrap(const std::vector<RouteHop>& route, const Address& mailbox, const SealedMessage& sealed,
                       crypto::Rng& rng);

struct Peeled {
    Address next;
    Bytes inner;
};

/// Removes one layer. nullopt on authentication failure (wrong key or tampering);
/// MalformedError when the packet or the decrypted layer does not parse.
std::optional<Peeled> onion_peel(const MixerKeyPair& keys, ByteView packet);

/// Hybrid seal of arbitrary bytes to a KEM public key (the primitive under each layer).
Bytes hybrid_seal(const KemPublicKey& recipient, ByteView plaintext, crypto::Rng& rng);
std::optional<Bytes> hybrid_open(const KemPublicKey& recipient, const KemSecretKey& secret, ByteView sealed);

// ---------------------------------------------------------------------------
// Serialization

void write_address(wire::Writer& w, const Address& a);
Address read_address(wire::Reader& r);
Bytes serialize(const Address& a);
Address deserialize_address(ByteView b);

void write_ibe_ciphertext(wire::Writer& w, crypto::CurvePreset preset, const crypto::IbeCiphertext& c);
crypto::IbeCiphertext read_ibe_ciphertext(wire::Reader& r, crypto::CurvePreset preset);

Bytes serialize(const SealedMessage& s);
SealedMessage deserialize_sealed(ByteView b);

Bytes serialize(const crypto::MasterPublicKey& mpk);
crypto::MasterPublicKey deserialize_mpk(ByteView b);

Bytes serialize(const crypto::IdentityPrivateKey& k);
crypto::IdentityPrivateKey deserialize_identity_key(ByteView b);

/// Upper bound of a serialized SealedMessage carrying a padded message.
std::size_t max_sealed_size(crypto::CurvePreset preset);

}  // namespace zephyr::envelope
