#include "zephyr/crypto/secretbox.hpp"

#include <cstring>

#include "zephyr/crypto/poly1305.hpp"
#include "zephyr/crypto/salsa20.hpp"
#include "zephyr/error.hpp"

namespace zephyr::crypto {
namespace {

void check_sizes(ByteView key, ByteView nonce) {
    if (key.size() != kSymKeySize) throw Error(Errc::LengthError, "symmetric key must be 32 bytes");
    if (nonce.size() != kSymNonceSize) throw Error(Errc::LengthError, "symmetric nonce must be 24 bytes");
}

// Keystream block 0 bytes [0,32) key the authenticator; the message starts at byte 32.
ByteArray<32> xor_with_stream(ByteView key, ByteView nonce, ByteView in, std::uint8_t* out) {
    Bytes buf(32 + in.size(), 0);
    if (!in.empty()) std::memcpy(buf.data() + 32, in.data(), in.size());
    xsalsa20_xor(buf.data(), buf.data(), buf.size(), key.data(), nonce.data());
    ByteArray<32> otk{};
    std::memcpy(otk.data(), buf.data(), 32);
    if (!in.empty()) std::memcpy(out, buf.data() + 32, in.size());
    std::memset(buf.data(), 0, 32);
    return otk;
}

}  // namespace

Bytes sym_encrypt(ByteView key, ByteView nonce, ByteView plaintext) {
    check_sizes(key, nonce);
    Bytes out(kSymTagSize + plaintext.size());
    auto otk = xor_with_stream(key, nonce, plaintext, out.data() + kSymTagSize);
    const auto tag = poly1305(ByteView(out).subspan(kSymTagSize), otk);
    std::memcpy(out.data(), tag.data(), kSymTagSize);
    otk.fill(0);
    return out;
}

std::optional<Bytes> sym_decrypt(ByteView key, ByteView nonce, ByteView ciphertext) {
    check_sizes(key, nonce);
    if (ciphertext.size() < kSymTagSize) throw MalformedError(ciphertext.size(), "ciphertext shorter than tag");
    const ByteView body = ciphertext.subspan(kSymTagSize);

    // Authenticator key only: one keystream block.
    ByteArray<32> otk{};
    xsalsa20_xor(otk.data(), otk.data(), otk.size(), key.data(), nonce.data());
    const auto expected = poly1305(body, otk);
    otk.fill(0);
    if (!equal_ct(expected, ciphertext.first(kSymTagSize))) return std::nullopt;

    Bytes plain(body.size());
    xor_with_stream(key, nonce, body, plain.data());
    return plain;
}

}  // namespace zephyr::crypto
