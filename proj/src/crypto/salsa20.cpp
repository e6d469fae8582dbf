#include "zephyr/crypto/salsa20.hpp"

#include <cstring>

#include "kernels/salsa20_kernels.hpp"

namespace zephyr::crypto {
namespace {

kernels::Salsa20XorFn kernel_fn(Salsa20Kernel k) {
    switch (k) {
        case Salsa20Kernel::Avx2:
            return kernels::salsa20_xor_avx2;
        case Salsa20Kernel::Sse2:
            return kernels::salsa20_xor_sse2;
        case Salsa20Kernel::Scalar:
            break;
    }
    return kernels::salsa20_xor_scalar;
}

Salsa20Kernel select_kernel() {
    if (kernels::have_avx2()) return Salsa20Kernel::Avx2;
    if (kernels::have_sse2()) return Salsa20Kernel::Sse2;
    return Salsa20Kernel::Scalar;
}

const Salsa20Kernel g_active = select_kernel();
const kernels::Salsa20XorFn g_active_fn = kernel_fn(g_active);

inline std::uint32_t rotl32(std::uint32_t v, int c) { return (v << c) | (v >> (32 - c)); }

}  // namespace

std::string_view kernel_name(Salsa20Kernel k) {
    switch (k) {
        case Salsa20Kernel::Scalar:
            return "scalar";
        case Salsa20Kernel::Sse2:
            return "sse2";
        case Salsa20Kernel::Avx2:
            return "avx2";
    }
    return "?";
}

std::vector<Salsa20Kernel> available_kernels() {
    std::vector<Salsa20Kernel> out{Salsa20Kernel::Scalar};
    if (kernels::have_sse2()) out.push_back(Salsa20Kernel::Sse2);
    if (kernels::have_avx2()) out.push_back(Salsa20Kernel::Avx2);
    return out;
}

Salsa20Kernel active_kernel() { return g_active; }

void salsa20_xor(std::uint8_t* out, const std::uint8_t* in, std::size_t len, const std::uint8_t key[32],
                 const std::uint8_t nonce[8], std::uint64_t counter) {
    g_active_fn(out, in, len, key, nonce, counter);
}

void salsa20_xor_with(Salsa20Kernel kernel, std::uint8_t* out, const std::uint8_t* in, std::size_t len,
                      const std::uint8_t key[32], const std::uint8_t nonce[8], std::uint64_t counter) {
    kernel_fn(kernel)(out, in, len, key, nonce, counter);
}

void hsalsa20(std::uint8_t out[32], const std::uint8_t in[16], const std::uint8_t key[32]) {
    std::uint32_t x[16];
    kernels::salsa20_init_state(x, key, in, 0);
    x[8] = kernels::load32_le(in + 8);
    x[9] = kernels::load32_le(in + 12);
#define ADD(a, b) ((a) + (b))
#define XOR(a, b) ((a) ^ (b))
#define ROTL(v, c) rotl32((v), (c))
    for (int i = 0; i < 10; ++i) {
        ZEPHYR_SALSA20_DOUBLE_ROUND(x);
    }
#undef ADD
#undef XOR
#undef ROTL
    const int picks[8] = {0, 5, 10, 15, 6, 7, 8, 9};
    for (int i = 0; i < 8; ++i) kernels::store32_le(out + 4 * i, x[picks[i]]);
}

void xsalsa20_xor(std::uint8_t* out, const std::uint8_t* in, std::size_t len, const std::uint8_t key[32],
                  const std::uint8_t nonce[24], std::uint64_t counter) {
    std::uint8_t subkey[32];
    hsalsa20(subkey, nonce, key);
    salsa20_xor(out, in, len, subkey, nonce + 16, counter);
    std::memset(subkey, 0, sizeof(subkey));
}

}  // namespace zephyr::crypto
