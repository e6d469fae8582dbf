#include "zephyr/envelope.hpp"

#include <sodium.h>

#include <cstring>

#include "zephyr/crypto/hash.hpp"
#include "zephyr/error.hpp"

namespace zephyr::envelope {

using crypto::CurvePreset;
using crypto::PairingContext;

// ---------------------------------------------------------------------------
// Padding

std::size_t bucket_for(std::size_t message_size) {
    for (auto b : kBuckets)
        if (message_size + 4 <= b) return b;
    throw Error(Errc::PayloadTooLong, "message of " + std::to_string(message_size) + " bytes exceeds the largest bucket");
}

Bytes pad_message(ByteView message) {
    const std::size_t bucket = bucket_for(message.size());
    wire::Writer w;
    w.bytes(message);
    Bytes out = std::move(w).take();
    out.resize(bucket, 0);
    return out;
}

Bytes unpad_message(ByteView padded) {
    bool is_bucket = false;
    for (auto b : kBuckets) is_bucket |= padded.size() == b;
    if (!is_bucket) throw MalformedError(0, "padded size is not a bucket size");
    wire::Reader r(padded);
    Bytes msg = r.bytes();
    if (bucket_for(msg.size()) != padded.size()) throw MalformedError(0, "message padded into the wrong bucket");
    const auto rest = r.rest();
    for (std::size_t i = 0; i < rest.size(); ++i)
        if (rest[i] != 0) throw MalformedError(4 + msg.size() + i, "nonzero padding");
    return msg;
}

// ---------------------------------------------------------------------------
// Recipient layer

crypto::Digest32 message_digest(ByteView message) { return crypto::hash256("zephyr-seal", {message}); }

SealedMessage seal_to_recipient(const crypto::MasterPublicKey& mpk, std::string_view recipient_identity,
                                ByteView message, crypto::Rng& rng) {
    if (message.empty()) throw Error(Errc::InvalidArgument, "message must be nonempty");
    return seal_to_recipient(crypto::ibe_precompute(mpk, recipient_identity), message, rng);
}

SealedMessage seal_to_recipient(const crypto::IbeRecipient& recipient, ByteView message, crypto::Rng& rng) {
    if (message.empty()) throw Error(Errc::InvalidArgument, "message must be nonempty");
    const auto digest = message_digest(message);
    SealedMessage s;
    s.preset = recipient.mpk.preset;
    s.nonce = rng.array<crypto::kSymNonceSize>();
    s.body = crypto::sym_encrypt(digest, s.nonce, message);
    s.enc_digest = crypto::ibe_encrypt(recipient, digest, rng);
    return s;
}

std::optional<Bytes> open_as_recipient(const crypto::IdentityPrivateKey& sk, const SealedMessage& sealed) {
    if (sk.preset != sealed.preset) return std::nullopt;
    if (sealed.enc_digest.v.size() != crypto::kSymKeySize) return std::nullopt;
    const Bytes digest = crypto::ibe_decrypt(sk, sealed.enc_digest);
    std::optional<Bytes> plain;
    try {
        plain = crypto::sym_decrypt(digest, sealed.nonce, sealed.body);
    } catch (const MalformedError&) {
        return std::nullopt;
    }
    if (!plain) return std::nullopt;
    const auto check = message_digest(*plain);
    if (!equal_ct(check, digest)) return std::nullopt;
    return plain;
}

// ---------------------------------------------------------------------------
// Hybrid sealing and onion layers

MixerKeyPair MixerKeyPair::generate(crypto::Rng& rng, const NodeId& mixer_id) {
    if (sodium_init() < 0) throw Error(Errc::Io, "libsodium initialisation failed");
    MixerKeyPair kp;
    kp.mixer_id = mixer_id;
    kp.secret_key = rng.array<kKemKeySize>();
    crypto_scalarmult_base(kp.public_key.data(), kp.secret_key.data());
    return kp;
}

void MixerKeyPair::erase_secret() { sodium_memzero(secret_key.data(), secret_key.size()); }

namespace {

std::optional<crypto::SymKey> layer_key(const KemSecretKey& secret, const KemPublicKey& peer_public,
                                        const KemPublicKey& ephemeral, const KemPublicKey& recipient) {
    ByteArray<32> shared{};
    if (crypto_scalarmult(shared.data(), secret.data(), peer_public.data()) != 0) return std::nullopt;
    auto key = crypto::hash256("zephyr-onion", {ByteView(shared), ByteView(ephemeral), ByteView(recipient)});
    sodium_memzero(shared.data(), shared.size());
    return key;
}

}  // namespace

Bytes hybrid_seal(const KemPublicKey& recipient, ByteView plaintext, crypto::Rng& rng) {
    if (sodium_init() < 0) throw Error(Errc::Io, "libsodium initialisation failed");
    KemSecretKey eph_secret = rng.array<kKemKeySize>();
    KemPublicKey eph_public{};
    crypto_scalarmult_base(eph_public.data(), eph_secret.data());
    auto key = layer_key(eph_secret, recipient, eph_public, recipient);
    sodium_memzero(eph_secret.data(), eph_secret.size());
    if (!key) throw Error(Errc::InvalidArgument, "degenerate mixer public key");
    const auto nonce = rng.array<crypto::kSymNonceSize>();
    wire::Writer w;
    w.version().raw(eph_public).raw(nonce).raw(crypto::sym_encrypt(*key, nonce, plaintext));
    return std::move(w).take();
}

std::optional<Bytes> hybrid_open(const KemPublicKey& recipient, const KemSecretKey& secret, ByteView sealed) {
    wire::Reader r(sealed);
    r.version();
    const auto eph_public = r.array<kKemKeySize>();
    const auto nonce = r.array<crypto::kSymNonceSize>();
    const auto body = r.rest();
    if (body.size() < crypto::kSymTagSize) throw MalformedError(sealed.size(), "layer shorter than tag");
    auto key = layer_key(secret, eph_public, eph_public, recipient);
    if (!key) return std::nullopt;
    return crypto::sym_decrypt(*key, nonce, body);
}

OnionPacket onion_wrap(const std::vector<RouteHop>& route, const Address& mailbox, const SealedMessage& sealed,
                       crypto::Rng& rng) {
    if (route.empty()) throw Error(Errc::RouteTooShort, "route must contain at least one mixer");
    if (mailbox.kind != AddressKind::Mailbox) throw Error(Errc::InvalidArgument, "final hop must be a mailbox");
    Bytes inner = serialize(sealed);
    Address next = mailbox;
    for (std::size_t i = route.size(); i-- > 0;) {
        wire::Writer layer;
        write_address(layer, next);
        layer.bytes(inner);
        inner = hybrid_seal(route[i].public_key, layer.data(), rng);
        next = route[i].address;
    }
    return inner;
}

std::optional<Peeled> onion_peel(const MixerKeyPair& keys, ByteView packet) {
    auto plain = hybrid_open(keys.public_key, keys.secret_key, packet);
    if (!plain) return std::nullopt;
    wire::Reader r(*plain);
    Peeled out;
    out.next = read_address(r);
    out.inner = r.bytes();
    r.finish();
    return out;
}

// ---------------------------------------------------------------------------
// Serialization

void write_address(wire::Writer& w, const Address& a) {
    w.u8(static_cast<std::uint8_t>(a.kind)).str(a.host).u16(a.port);
    if (a.kind == AddressKind::Mailbox) w.raw(a.mailbox_id);
}

Address read_address(wire::Reader& r) {
    Address a;
    const std::size_t at = r.offset();
    const std::uint8_t kind = r.u8();
    if (kind > 1) throw MalformedError(at, "unknown address kind");
    a.kind = static_cast<AddressKind>(kind);
    a.host = r.str(255);
    const std::size_t port_at = r.offset();
    a.port = r.u16();
    if (a.port == 0) throw MalformedError(port_at, "port must be in 1..65535");
    if (a.kind == AddressKind::Mailbox) a.mailbox_id = r.array<32>();
    return a;
}

Bytes serialize(const Address& a) {
    wire::Writer w;
    w.version();
    write_address(w, a);
    return std::move(w).take();
}

Address deserialize_address(ByteView b) {
    wire::Reader r(b);
    r.version();
    auto a = read_address(r);
    r.finish();
    return a;
}

namespace {

CurvePreset read_preset(wire::Reader& r) {
    const std::size_t at = r.offset();
    const auto v = r.u8();
    if (v != static_cast<std::uint8_t>(CurvePreset::TypeA1536) && v != static_cast<std::uint8_t>(CurvePreset::TypeATiny))
        throw MalformedError(at, "unknown curve preset");
    return static_cast<CurvePreset>(v);
}

crypto::G1Point read_g1(wire::Reader& r, const PairingContext& ctx) {
    const std::size_t at = r.offset();
    const auto raw = r.raw(ctx.g1_bytes());
    try {
        return ctx.decode_g1(raw);
    } catch (const MalformedError& e) {
        throw MalformedError(at + e.offset(), "invalid group element");
    }
}

}  // namespace

void write_ibe_ciphertext(wire::Writer& w, CurvePreset preset, const crypto::IbeCiphertext& c) {
    w.raw(PairingContext::get(preset).encode_g1(c.u)).bytes(c.v);
}

crypto::IbeCiphertext read_ibe_ciphertext(wire::Reader& r, CurvePreset preset) {
    crypto::IbeCiphertext c;
    c.u = read_g1(r, PairingContext::get(preset));
    c.v = r.bytes(crypto::kIbeMaxPlaintext);
    return c;
}

Bytes serialize(const SealedMessage& s) {
    wire::Writer w;
    w.version().u8(static_cast<std::uint8_t>(s.preset));
    write_ibe_ciphertext(w, s.preset, s.enc_digest);
    w.raw(s.nonce).bytes(s.body);
    return std::move(w).take();
}

SealedMessage deserialize_sealed(ByteView b) {
    wire::Reader r(b);
    r.version();
    SealedMessage s;
    s.preset = read_preset(r);
    s.enc_digest = read_ibe_ciphertext(r, s.preset);
    s.nonce = r.array<crypto::kSymNonceSize>();
    s.body = r.bytes();
    if (s.body.size() < crypto::kSymTagSize) throw MalformedError(r.offset(), "body shorter than tag");
    r.finish();
    return s;
}

Bytes serialize(const crypto::MasterPublicKey& mpk) {
    const auto& ctx = mpk.context();
    wire::Writer w;
    w.version().u8(static_cast<std::uint8_t>(mpk.preset));
    w.raw(ctx.encode_g1(ctx.generator())).raw(ctx.encode_g1(mpk.p_pub));
    w.str(crypto::kH1Tag).str(crypto::kH2Tag);
    return std::move(w).take();
}

crypto::MasterPublicKey deserialize_mpk(ByteView b) {
    wire::Reader r(b);
    r.version();
    crypto::MasterPublicKey mpk;
    mpk.preset = read_preset(r);
    const auto& ctx = mpk.context();
    const std::size_t gen_at = r.offset();
    if (!(read_g1(r, ctx) == ctx.generator())) throw MalformedError(gen_at, "generator mismatch");
    mpk.p_pub = read_g1(r, ctx);
    if (mpk.p_pub.infinity) throw MalformedError(gen_at + ctx.g1_bytes(), "identity public key");
    const std::size_t tag_at = r.offset();
    if (r.str(64) != crypto::kH1Tag || r.str(64) != crypto::kH2Tag) throw MalformedError(tag_at, "hash tag mismatch");
    r.finish();
    return mpk;
}

Bytes serialize(const crypto::IdentityPrivateKey& k) {
    const auto& ctx = PairingContext::get(k.preset);
    wire::Writer w;
    w.version().u8(static_cast<std::uint8_t>(k.preset)).str(k.identity).raw(ctx.encode_g1(k.d_id));
    return std::move(w).take();
}

crypto::IdentityPrivateKey deserialize_identity_key(ByteView b) {
    wire::Reader r(b);
    r.version();
    crypto::IdentityPrivateKey k;
    k.preset = read_preset(r);
    k.identity = r.str(320);
    k.d_id = read_g1(r, PairingContext::get(k.preset));
    r.finish();
    return k;
}

std::size_t max_sealed_size(CurvePreset preset) {
    const auto& ctx = PairingContext::get(preset);
    return 2 + ctx.g1_bytes() + 4 + crypto::kIbeMaxPlaintext + crypto::kSymNonceSize + 4 + crypto::kSymTagSize +
           kMaxPaddedSize;
}

}  // namespace zephyr::envelope
