#include "salsa20_kernels.hpp"

// Built with -mavx2; only reached when the CPU reports AVX2.
#if defined(__AVX2__)
#include <immintrin.h>

namespace zephyr::crypto::kernels {
namespace {

constexpr std::size_t kLanes = 8;

inline __m256i rotl(__m256i v, int c) {
    return _mm256_or_si256(_mm256_slli_epi32(v, c), _mm256_srli_epi32(v, 32 - c));
}

}  // namespace

void salsa20_xor_avx2(std::uint8_t* out, const std::uint8_t* in, std::size_t len, const std::uint8_t key[32],
                      const std::uint8_t nonce[8], std::uint64_t counter) {
    std::uint32_t base[16];
    alignas(32) std::uint32_t words[16][kLanes];
    alignas(32) std::uint32_t lo[kLanes];
    alignas(32) std::uint32_t hi[kLanes];
    while (len >= 64 * kLanes) {
        salsa20_init_state(base, key, nonce, counter);
        __m256i in_v[16];
        for (int j = 0; j < 16; ++j) in_v[j] = _mm256_set1_epi32(static_cast<int>(base[j]));
        for (std::size_t l = 0; l < kLanes; ++l) {
            lo[l] = std::uint32_t(counter + l);
            hi[l] = std::uint32_t((counter + l) >> 32);
        }
        in_v[8] = _mm256_load_si256(reinterpret_cast<const __m256i*>(lo));
        in_v[9] = _mm256_load_si256(reinterpret_cast<const __m256i*>(hi));

        __m256i x[16];
        for (int j = 0; j < 16; ++j) x[j] = in_v[j];
#define ADD(a, b) _mm256_add_epi32((a), (b))
#define XOR(a, b) _mm256_xor_si256((a), (b))
#define ROTL(v, c) rotl((v), (c))
        for (int i = 0; i < 10; ++i) {
            ZEPHYR_SALSA20_DOUBLE_ROUND(x);
        }
#undef ADD
#undef XOR
#undef ROTL
        for (int j = 0; j < 16; ++j)
            _mm256_store_si256(reinterpret_cast<__m256i*>(words[j]), _mm256_add_epi32(x[j], in_v[j]));

        for (std::size_t l = 0; l < kLanes; ++l) {
            alignas(32) std::uint8_t ks[64];
            for (int j = 0; j < 16; ++j) store32_le(ks + 4 * j, words[j][l]);
            const __m256i k0 = _mm256_load_si256(reinterpret_cast<const __m256i*>(ks));
            const __m256i k1 = _mm256_load_si256(reinterpret_cast<const __m256i*>(ks + 32));
            const __m256i m0 = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(in));
            const __m256i m1 = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(in + 32));
            _mm256_storeu_si256(reinterpret_cast<__m256i*>(out), _mm256_xor_si256(m0, k0));
            _mm256_storeu_si256(reinterpret_cast<__m256i*>(out + 32), _mm256_xor_si256(m1, k1));
            out += 64;
            in += 64;
        }
        len -= 64 * kLanes;
        counter += kLanes;
    }
    if (len > 0) salsa20_xor_scalar(out, in, len, key, nonce, counter);
}

}  // namespace zephyr::crypto::kernels

#else

namespace zephyr::crypto::kernels {
void salsa20_xor_avx2(std::uint8_t* out, const std::uint8_t* in, std::size_t len, const std::uint8_t key[32],
                      const std::uint8_t nonce[8], std::uint64_t counter) {
    salsa20_xor_scalar(out, in, len, key, nonce, counter);
}
}  // namespace zephyr::crypto::kernels

#endif

namespace zephyr::crypto::kernels {
bool have_avx2() {
#if defined(__AVX2__)
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}
}  // namespace zephyr::crypto::kernels
