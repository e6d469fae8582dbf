#include "salsa20_kernels.hpp"

#if defined(__x86_64__) || defined(__i386__)
#include <emmintrin.h>

namespace zephyr::crypto::kernels {
namespace {

constexpr std::size_t kLanes = 4;

inline __m128i rotl(__m128i v, int c) {
    return _mm_or_si128(_mm_slli_epi32(v, c), _mm_srli_epi32(v, 32 - c));
}

}  // namespace

void salsa20_xor_sse2(std::uint8_t* out, const std::uint8_t* in, std::size_t len, const std::uint8_t key[32],
                      const std::uint8_t nonce[8], std::uint64_t counter) {
    std::uint32_t base[16];
    alignas(16) std::uint32_t words[16][kLanes];
    while (len >= 64 * kLanes) {
        salsa20_init_state(base, key, nonce, counter);
        __m128i in_v[16];
        for (int j = 0; j < 16; ++j) in_v[j] = _mm_set1_epi32(static_cast<int>(base[j]));
        std::uint32_t lo[kLanes], hi[kLanes];
        for (std::size_t l = 0; l < kLanes; ++l) {
            lo[l] = std::uint32_t(counter + l);
            hi[l] = std::uint32_t((counter + l) >> 32);
        }
        in_v[8] = _mm_setr_epi32(int(lo[0]), int(lo[1]), int(lo[2]), int(lo[3]));
        in_v[9] = _mm_setr_epi32(int(hi[0]), int(hi[1]), int(hi[2]), int(hi[3]));

        __m128i x[16];
        for (int j = 0; j < 16; ++j) x[j] = in_v[j];
#define ADD(a, b) _mm_add_epi32((a), (b))
#define XOR(a, b) _mm_xor_si128((a), (b))
#define ROTL(v, c) rotl((v), (c))
        for (int i = 0; i < 10; ++i) {
            ZEPHYR_SALSA20_DOUBLE_ROUND(x);
        }
#undef ADD
#undef XOR
#undef ROTL
        for (int j = 0; j < 16; ++j)
            _mm_store_si128(reinterpret_cast<__m128i*>(words[j]), _mm_add_epi32(x[j], in_v[j]));

        for (std::size_t l = 0; l < kLanes; ++l) {
            std::uint8_t ks[64];
            for (int j = 0; j < 16; ++j) store32_le(ks + 4 * j, words[j][l]);
            for (int i = 0; i < 64; ++i) out[i] = in[i] ^ ks[i];
            out += 64;
            in += 64;
        }
        len -= 64 * kLanes;
        counter += kLanes;
    }
    if (len > 0) salsa20_xor_scalar(out, in, len, key, nonce, counter);
}

bool have_sse2() { return __builtin_cpu_supports("sse2"); }

}  // namespace zephyr::crypto::kernels

#else

namespace zephyr::crypto::kernels {
void salsa20_xor_sse2(std::uint8_t* out, const std::uint8_t* in, std::size_t len, const std::uint8_t key[32],
                      const std::uint8_t nonce[8], std::uint64_t counter) {
    salsa20_xor_scalar(out, in, len, key, nonce, counter);
}
bool have_sse2() { return false; }
}  // namespace zephyr::crypto::kernels

#endif
