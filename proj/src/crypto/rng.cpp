#include "zephyr/crypto/rng.hpp"

#include <sodium.h>

#include <cstring>

#include "zephyr/crypto/hash.hpp"
#include "zephyr/crypto/salsa20.hpp"
#include "zephyr/error.hpp"

namespace zephyr::crypto {

std::uint64_t Rng::next_u64() {
    std::uint8_t b[8];
    fill(b);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

std::uint64_t Rng::uniform(std::uint64_t bound) {
    if (bound == 0) throw Error(Errc::InvalidArgument, "uniform bound must be nonzero");
    // Rejection sampling over the largest multiple of bound.
    const std::uint64_t limit = max() - (max() % bound + 1) % bound;
    for (;;) {
        const std::uint64_t v = next_u64();
        if (v <= limit) return v % bound;
    }
}

double Rng::unit() { return double(next_u64() >> 11) * (1.0 / 9007199254740992.0); }

Bytes Rng::bytes(std::size_t n) {
    Bytes b(n);
    fill(b);
    return b;
}

void OsRng::fill(std::span<std::uint8_t> out) {
    if (sodium_init() < 0) throw Error(Errc::Io, "libsodium initialisation failed");
    randombytes_buf(out.data(), out.size());
}

DeterministicRng::DeterministicRng(std::uint64_t seed, std::string_view label) {
    std::uint8_t s[8];
    for (int i = 0; i < 8; ++i) s[i] = std::uint8_t(seed >> (8 * i));
    key_ = hash256("zephyr-drbg", {ByteView(s, 8), as_bytes(label)});
}

DeterministicRng::DeterministicRng(ByteView seed_material) { key_ = hash256("zephyr-drbg", {seed_material}); }

void DeterministicRng::fill(std::span<std::uint8_t> out) {
    static const std::uint8_t nonce[8] = {'z', 'e', 'p', 'h', 'y', 'r', 'r', 'g'};
    std::size_t pos = 0;
    while (pos < out.size()) {
        if (used_ == 64) {
            buffer_.fill(0);
            salsa20_xor(buffer_.data(), buffer_.data(), 64, key_.data(), nonce, block_++);
            used_ = 0;
        }
        const std::size_t n = std::min(out.size() - pos, std::size_t(64) - used_);
        std::memcpy(out.data() + pos, buffer_.data() + used_, n);
        used_ += n;
        pos += n;
    }
}

DeterministicRng DeterministicRng::fork(std::string_view label) {
    const auto material = array<32>();
    Bytes seed(material.begin(), material.end());
    append(seed, as_bytes(label));
    return DeterministicRng(seed);
}

}  // namespace zephyr::crypto
