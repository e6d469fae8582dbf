#pragma once

#include <cstddef>
#include <cstdint>

// Internal kernel entry points; selected by salsa20_dispatch.cpp.

namespace zephyr::crypto::kernels {

using Salsa20XorFn = void (*)(std::uint8_t* out, const std::uint8_t* in, std::size_t len,
                              const std::uint8_t key[32], const std::uint8_t nonce[8], std::uint64_t counter);

void salsa20_xor_scalar(std::uint8_t* out, const std::uint8_t* in, std::size_t len, const std::uint8_t key[32],
                        const std::uint8_t nonce[8], std::uint64_t counter);
void salsa20_xor_sse2(std::uint8_t* out, const std::uint8_t* in, std::size_t len, const std::uint8_t key[32],
                      const std::uint8_t nonce[8], std::uint64_t counter);
void salsa20_xor_avx2(std::uint8_t* out, const std::uint8_t* in, std::size_t len, const std::uint8_t key[32],
                      const std::uint8_t nonce[8], std::uint64_t counter);

bool have_sse2();
bool have_avx2();

// static: each kernel TU is compiled with different ISA flags.
static inline std::uint32_t load32_le(const std::uint8_t* p) {
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
           (std::uint32_t(p[3]) << 24);
}

static inline void store32_le(std::uint8_t* p, std::uint32_t v) {
    p[0] = std::uint8_t(v);
    p[1] = std::uint8_t(v >> 8);
    p[2] = std::uint8_t(v >> 16);
    p[3] = std::uint8_t(v >> 24);
}

static inline void salsa20_init_state(std::uint32_t s[16], const std::uint8_t key[32], const std::uint8_t nonce[8],
                               std::uint64_t counter) {
    s[0] = 0x61707865;
    s[1] = load32_le(key + 0);
    s[2] = load32_le(key + 4);
    s[3] = load32_le(key + 8);
    s[4] = load32_le(key + 12);
    s[5] = 0x3320646e;
    s[6] = load32_le(nonce + 0);
    s[7] = load32_le(nonce + 4);
    s[8] = std::uint32_t(counter);
    s[9] = std::uint32_t(counter >> 32);
    s[10] = 0x79622d32;
    s[11] = load32_le(key + 16);
    s[12] = load32_le(key + 20);
    s[13] = load32_le(key + 24);
    s[14] = load32_le(key + 28);
    s[15] = 0x6b206574;
}

}  // namespace zephyr::crypto::kernels

// Twenty Salsa20 rounds over x0..x15 given ADD/XOR/ROTL for the lane type.
// Expanded in each kernel translation unit so every ISA gets its own copy.
#define ZEPHYR_SALSA20_QR(a, b, c, d)          \
    b = XOR(b, ROTL(ADD(a, d), 7));            \
    c = XOR(c, ROTL(ADD(b, a), 9));            \
    d = XOR(d, ROTL(ADD(c, b), 13));           \
    a = XOR(a, ROTL(ADD(d, c), 18))

#define ZEPHYR_SALSA20_DOUBLE_ROUND(x)                    \
    ZEPHYR_SALSA20_QR(x[0], x[4], x[8], x[12]);           \
    ZEPHYR_SALSA20_QR(x[5], x[9], x[13], x[1]);           \
    ZEPHYR_SALSA20_QR(x[10], x[14], x[2], x[6]);          \
    ZEPHYR_SALSA20_QR(x[15], x[3], x[7], x[11]);          \
    ZEPHYR_SALSA20_QR(x[0], x[1], x[2], x[3]);            \
    ZEPHYR_SALSA20_QR(x[5], x[6], x[7], x[4]);            \
    ZEPHYR_SALSA20_QR(x[10], x[11], x[8], x[9]);          \
    ZEPHYR_SALSA20_QR(x[15], x[12], x[13], x[14])
