#include "zephyr/crypto/poly1305.hpp"

#include <cstring>

namespace zephyr::crypto {
namespace {

using u64 = std::uint64_t;
using u128 = unsigned __int128;

u64 load64_le(const std::uint8_t* p) {
    u64 v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

void store64_le(std::uint8_t* p, u64 v) {
    for (int i = 0; i < 8; ++i) p[i] = std::uint8_t(v >> (8 * i));
}

// 44/44/42-bit limb representation.
struct State {
    u64 r[3];
    u64 h[3] = {0, 0, 0};
    u64 pad[2];

    explicit State(const std::uint8_t key[32]) {
        const u64 t0 = load64_le(key);
        const u64 t1 = load64_le(key + 8);
        r[0] = t0 & 0xffc0fffffffULL;
        r[1] = ((t0 >> 44) | (t1 << 20)) & 0xfffffc0ffffULL;
        r[2] = (t1 >> 24) & 0x00ffffffc0fULL;
        pad[0] = load64_le(key + 16);
        pad[1] = load64_le(key + 24);
    }

    void blocks(const std::uint8_t* m, std::size_t len, u64 hibit) {
        const u64 r0 = r[0], r1 = r[1], r2 = r[2];
        const u64 s1 = r1 * (5 << 2);
        const u64 s2 = r2 * (5 << 2);
        u64 h0 = h[0], h1 = h[1], h2 = h[2];
        while (len >= 16) {
            const u64 t0 = load64_le(m);
            const u64 t1 = load64_le(m + 8);
            h0 += t0 & 0xfffffffffffULL;
            h1 += ((t0 >> 44) | (t1 << 20)) & 0xfffffffffffULL;
            h2 += ((t1 >> 24) & 0x3ffffffffffULL) | hibit;

            u128 d0 = u128(h0) * r0 + u128(h1) * s2 + u128(h2) * s1;
            u128 d1 = u128(h0) * r1 + u128(h1) * r0 + u128(h2) * s2;
            u128 d2 = u128(h0) * r2 + u128(h1) * r1 + u128(h2) * r0;

            u64 c = u64(d0 >> 44);
            h0 = u64(d0) & 0xfffffffffffULL;
            d1 += c;
            c = u64(d1 >> 44);
            h1 = u64(d1) & 0xfffffffffffULL;
            d2 += c;
            c = u64(d2 >> 42);
            h2 = u64(d2) & 0x3ffffffffffULL;
            h0 += c * 5;
            c = h0 >> 44;
            h0 &= 0xfffffffffffULL;
            h1 += c;
            m += 16;
            len -= 16;
        }
        h[0] = h0;
        h[1] = h1;
        h[2] = h2;
    }

    void finish(std::uint8_t out[16]) {
        u64 h0 = h[0], h1 = h[1], h2 = h[2];
        u64 c = h1 >> 44;
        h1 &= 0xfffffffffffULL;
        h2 += c;
        c = h2 >> 42;
        h2 &= 0x3ffffffffffULL;
        h0 += c * 5;
        c = h0 >> 44;
        h0 &= 0xfffffffffffULL;
        h1 += c;
        c = h1 >> 44;
        h1 &= 0xfffffffffffULL;
        h2 += c;
        c = h2 >> 42;
        h2 &= 0x3ffffffffffULL;
        h0 += c * 5;
        c = h0 >> 44;
        h0 &= 0xfffffffffffULL;
        h1 += c;

        // g = h - p
        u64 g0 = h0 + 5;
        c = g0 >> 44;
        g0 &= 0xfffffffffffULL;
        u64 g1 = h1 + c;
        c = g1 >> 44;
        g1 &= 0xfffffffffffULL;
        u64 g2 = h2 + c - (u64(1) << 42);

        // select h if h < p, else g
        c = (g2 >> 63) - 1;
        g0 &= c;
        g1 &= c;
        g2 &= c;
        c = ~c;
        h0 = (h0 & c) | g0;
        h1 = (h1 & c) | g1;
        h2 = (h2 & c) | g2;

        // h += pad
        const u64 t0 = pad[0];
        const u64 t1 = pad[1];
        h0 += t0 & 0xfffffffffffULL;
        c = h0 >> 44;
        h0 &= 0xfffffffffffULL;
        h1 += (((t0 >> 44) | (t1 << 20)) & 0xfffffffffffULL) + c;
        c = h1 >> 44;
        h1 &= 0xfffffffffffULL;
        h2 += ((t1 >> 24) & 0x3ffffffffffULL) + c;
        h2 &= 0x3ffffffffffULL;

        store64_le(out, h0 | (h1 << 44));
        store64_le(out + 8, (h1 >> 20) | (h2 << 24));
    }
};

}  // namespace

Poly1305Tag poly1305(ByteView message, const ByteArray<32>& one_time_key) {
    State st(one_time_key.data());
    const std::size_t full = message.size() & ~std::size_t(15);
    st.blocks(message.data(), full, u64(1) << 40);
    const std::size_t rest = message.size() - full;
    if (rest > 0) {
        std::uint8_t last[16] = {};
        std::memcpy(last, message.data() + full, rest);
        last[rest] = 1;
        st.blocks(last, 16, 0);
    }
    Poly1305Tag tag{};
    st.finish(tag.data());
    return tag;
}

}  // namespace zephyr::crypto
