#pragma once

#include "zephyr/bytes.hpp"
#include "zephyr/crypto/rng.hpp"

namespace zephyr::crypto {

inline constexpr std::size_t kSignPublicKeySize = 32;
inline constexpr std::size_t kSignatureSize = 64;
using SignPublicKey = ByteArray<kSignPublicKeySize>;
using Signature = ByteArray<kSignatureSize>;

/// Ed25519 long-term node key; the seed alone reproduces it.
class SigningKey {
public:
    static SigningKey generate(Rng& rng);
    static SigningKey from_seed(const ByteArray<32>& seed);

    const SignPublicKey& public_key() const { return pk_; }
    const ByteArray<32>& seed() const { return seed_; }
    Signature sign(ByteView message) const;

private:
    ByteArray<32> seed_{};
    SignPublicKey pk_{};
    ByteArray<64> sk_{};
};

bool verify_signature(const SignPublicKey& pk, ByteView message, const Signature& sig);

}  // namespace zephyr::crypto
