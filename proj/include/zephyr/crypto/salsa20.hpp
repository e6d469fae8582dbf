#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "zephyr/bytes.hpp"

namespace zephyr::crypto {

/// Salsa20 keystream implementations. All kernels produce identical output;
/// the vector kernels process 4 (SSE2) or 8 (AVX2) blocks per iteration.
enum class Salsa20Kernel { Scalar, Sse2, Avx2 };

std::string_view kernel_name(Salsa20Kernel k);

/// Kernels usable on this CPU, scalar first.
std::vector<Salsa20Kernel> available_kernels();

/// The kernel selected at startup (widest available).
Salsa20Kernel active_kernel();

/// out[i] = in[i] ^ keystream[i], keystream starting at 64-byte block `counter`.
void salsa20_xor(std::uint8_t* out, const std::uint8_t* in, std::size_t len, const std::uint8_t key[32],
                 const std::uint8_t nonce[8], std::uint64_t counter);

void salsa20_xor_with(Salsa20Kernel kernel, std::uint8_t* out, const std::uint8_t* in, std::size_t len,
                      const std::uint8_t key[32], const std::uint8_t nonce[8], std::uint64_t counter);

/// HSalsa20 core: derives a subkey from a key and a 16-byte input.
void hsalsa20(std::uint8_t out[32], const std::uint8_t in[16], const std::uint8_t key[32]);

/// XSalsa20: 24-byte nonce; the first 16 bytes go through HSalsa20.
void xsalsa20_xor(std::uint8_t* out, const std::uint8_t* in, std::size_t len, const std::uint8_t key[32],
                  const std::uint8_t nonce[24], std::uint64_t counter = 0);

}  // namespace zephyr::crypto
