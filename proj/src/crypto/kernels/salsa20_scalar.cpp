#include <cstring>

#include "salsa20_kernels.hpp"

namespace zephyr::crypto::kernels {
namespace {

inline std::uint32_t rotl32(std::uint32_t v, int c) { return (v << c) | (v >> (32 - c)); }

void block(std::uint8_t out[64], const std::uint32_t in[16]) {
    std::uint32_t x[16];
    std::memcpy(x, in, sizeof(x));
#define ADD(a, b) ((a) + (b))
#define XOR(a, b) ((a) ^ (b))
#define ROTL(v, c) rotl32((v), (c))
    for (int i = 0; i < 10; ++i) {
        ZEPHYR_SALSA20_DOUBLE_ROUND(x);
    }
#undef ADD
#undef XOR
#undef ROTL
    for (int i = 0; i < 16; ++i) store32_le(out + 4 * i, x[i] + in[i]);
}

}  // namespace

void salsa20_xor_scalar(std::uint8_t* out, const std::uint8_t* in, std::size_t len, const std::uint8_t key[32],
                        const std::uint8_t nonce[8], std::uint64_t counter) {
    std::uint32_t state[16];
    std::uint8_t ks[64];
    while (len > 0) {
        salsa20_init_state(state, key, nonce, counter);
        block(ks, state);
        const std::size_t n = len < 64 ? len : 64;
        for (std::size_t i = 0; i < n; ++i) out[i] = in[i] ^ ks[i];
        out += n;
        in += n;
        len -= n;
        ++counter;
    }
}

}  // namespace zephyr::crypto::kernels
