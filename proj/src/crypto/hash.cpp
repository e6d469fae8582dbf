#include "zephyr/crypto/hash.hpp"

#include <sodium.h>

#include <cstring>

#include "zephyr/error.hpp"

namespace zephyr::crypto {
namespace {

void hash_into(std::string_view tag, std::initializer_list<ByteView> parts, std::uint8_t* out, std::size_t out_len) {
    if (out_len < crypto_generichash_BYTES_MIN || out_len > crypto_generichash_BYTES_MAX)
        throw Error(Errc::InvalidArgument, "hash output length out of range");
    crypto_generichash_state st;
    crypto_generichash_init(&st, nullptr, 0, out_len);
    crypto_generichash_update(&st, reinterpret_cast<const unsigned char*>(tag.data()), tag.size());
    const unsigned char sep = 0;
    crypto_generichash_update(&st, &sep, 1);
    for (auto p : parts) crypto_generichash_update(&st, p.data(), p.size());
    crypto_generichash_final(&st, out, out_len);
}

}  // namespace

Bytes tagged_hash(std::string_view tag, std::initializer_list<ByteView> parts, std::size_t out_len) {
    Bytes out(out_len);
    hash_into(tag, parts, out.data(), out_len);
    return out;
}

Digest32 hash256(std::string_view tag, std::initializer_list<ByteView> parts) {
    Digest32 d{};
    hash_into(tag, parts, d.data(), d.size());
    return d;
}

Digest20 hash160(std::string_view tag, std::initializer_list<ByteView> parts) {
    Digest20 d{};
    hash_into(tag, parts, d.data(), d.size());
    return d;
}

Bytes expand(std::string_view tag, std::initializer_list<ByteView> parts, std::size_t out_len) {
    const auto seed = hash256(tag, parts);
    Bytes out;
    out.reserve(out_len + 64);
    for (std::uint32_t ctr = 0; out.size() < out_len; ++ctr) {
        std::uint8_t c[4] = {std::uint8_t(ctr), std::uint8_t(ctr >> 8), std::uint8_t(ctr >> 16),
                             std::uint8_t(ctr >> 24)};
        std::uint8_t block[64];
        hash_into(tag, {ByteView(seed), ByteView(c, 4)}, block, 64);
        out.insert(out.end(), block, block + 64);
    }
    out.resize(out_len);
    return out;
}

}  // namespace zephyr::crypto
