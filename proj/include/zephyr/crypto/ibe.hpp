#pragma once

#include <string>
#include <string_view>

#include "zephyr/bytes.hpp"
#include "zephyr/crypto/pairing.hpp"
#include "zephyr/crypto/rng.hpp"

namespace zephyr::crypto {

// Boneh-Franklin BasicIdent over a symmetric pairing.
//   H1: identity -> G1, hash-then-map tagged "zephyr-h1"
//   H2: GT -> 32 bytes, BLAKE2b tagged "zephyr-h2"
inline constexpr std::string_view kH1Tag = "zephyr-h1";
inline constexpr std::string_view kH2Tag = "zephyr-h2";
inline constexpr std::size_t kIbeMaxPlaintext = 32;

struct MasterPublicKey {
    CurvePreset preset = CurvePreset::TypeA1536;
    G1Point p_pub;

    const PairingContext& context() const { return PairingContext::get(preset); }
    friend bool operator==(const MasterPublicKey&, const MasterPublicKey&) = default;
};

struct MasterKeyPair {
    MasterPublicKey mpk;
    mpz_class msk;
};

struct IdentityPrivateKey {
    CurvePreset preset = CurvePreset::TypeA1536;
    std::string identity;  // case-folded
    G1Point d_id;
};

struct IbeCiphertext {
    G1Point u;
    Bytes v;

    friend bool operator==(const IbeCiphertext&, const IbeCiphertext&) = default;
};

/// ASCII case folding; the identity must be nonempty.
std::string fold_identity(std::string_view identity);

MasterKeyPair ibe_setup(Rng& rng, CurvePreset preset = CurvePreset::TypeA1536);

IdentityPrivateKey ibe_extract(const MasterKeyPair& master, std::string_view identity);

/// Checks e(d_id, P) == e(H1(id), p_pub) without the master secret.
bool ibe_verify_key(const MasterPublicKey& mpk, const IdentityPrivateKey& key);

IbeCiphertext ibe_encrypt(const MasterPublicKey& mpk, std::string_view identity, ByteView plaintext, Rng& rng);

/// Per-recipient precomputation: g_id = e(H1(id), p_pub). Encrypting to the
/// same identity repeatedly then costs one scalar mul and one GT power.
struct IbeRecipient {
    MasterPublicKey mpk;
    std::string identity;  // case-folded
    GtElement g_id;
};

IbeRecipient ibe_precompute(const MasterPublicKey& mpk, std::string_view identity);
IbeCiphertext ibe_encrypt(const IbeRecipient& recipient, ByteView plaintext, Rng& rng);

/// Always returns v XOR H2(e(d_id, u)); with the wrong key the result is garbage, not an error.
Bytes ibe_decrypt(const IdentityPrivateKey& key, const IbeCiphertext& c);

G1Point hash_identity(const PairingContext& ctx, std::string_view folded_identity);

}  // namespace zephyr::crypto
