#pragma once

#include <optional>

#include "zephyr/bytes.hpp"

namespace zephyr::crypto {

inline constexpr std::size_t kSymKeySize = 32;
inline constexpr std::size_t kSymNonceSize = 24;
inline constexpr std::size_t kSymTagSize = 16;

using SymKey = ByteArray<kSymKeySize>;
using SymNonce = ByteArray<kSymNonceSize>;

// XSalsa20-Poly1305. Ciphertext layout is tag || encrypted bytes.

Bytes sym_encrypt(ByteView key, ByteView nonce, ByteView plaintext);

/// Returns nullopt on authentication failure. Throws MalformedError when the
/// ciphertext is shorter than a tag and Error(LengthError) on bad key/nonce sizes.
std::optional<Bytes> sym_decrypt(ByteView key, ByteView nonce, ByteView ciphertext);

}  // namespace zephyr::crypto
