#include "zephyr/crypto/sign.hpp"

#include <sodium.h>

namespace zephyr::crypto {

SigningKey SigningKey::generate(Rng& rng) { return from_seed(rng.array<32>()); }

SigningKey SigningKey::from_seed(const ByteArray<32>& seed) {
    SigningKey k;
    k.seed_ = seed;
    crypto_sign_seed_keypair(k.pk_.data(), k.sk_.data(), seed.data());
    return k;
}

Signature SigningKey::sign(ByteView message) const {
    Signature sig{};
    crypto_sign_detached(sig.data(), nullptr, message.data(), message.size(), sk_.data());
    return sig;
}

bool verify_signature(const SignPublicKey& pk, ByteView message, const Signature& sig) {
    return crypto_sign_verify_detached(sig.data(), message.data(), message.size(), pk.data()) == 0;
}

}  // namespace zephyr::crypto
