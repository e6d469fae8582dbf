#include <gtest/gtest.h>

#include <chrono>
#include <optional>
#include <set>

#include "zephyr/crypto/pairing.hpp"
#include "zephyr/error.hpp"

using namespace zephyr;
using namespace zephyr::crypto;

namespace {

// ---------------------------------------------------------------------------
// Independent oracle for the tiny curve (p = 131): affine Miller loop with
// explicit vertical lines and a naive final exponentiation, in plain integers.

constexpr std::int64_t kP = 131;
constexpr std::int64_t kQ = 11;

std::int64_t md(std::int64_t v) { return ((v % kP) + kP) % kP; }

std::int64_t inv(std::int64_t v) {
    std::int64_t r = 1, b = md(v), e = kP - 2;
    while (e) {
        if (e & 1) r = r * b % kP;
        b = b * b % kP;
        e >>= 1;
    }
    return r;
}

struct C {
    std::int64_t a, b;
};
C cmul(C x, C y) { return {md(x.a * y.a - x.b * y.b), md(x.a * y.b + x.b * y.a)}; }
C cinv(C x) {
    const std::int64_t n = inv(md(x.a * x.a + x.b * x.b));
    return {md(x.a * n), md(-x.b * n)};
}
C cpow(C x, std::int64_t e) {
    C r{1, 0};
    while (e) {
        if (e & 1) r = cmul(r, x);
        x = cmul(x, x);
        e >>= 1;
    }
    return r;
}

struct Pt {
    std::int64_t x, y;
    bool inf;
};

Pt padd(Pt a, Pt b) {
    if (a.inf) return b;
    if (b.inf) return a;
    if (a.x == b.x && md(a.y + b.y) == 0) return {0, 0, true};
    std::int64_t lam = (a.x == b.x) ? md((3 * a.x * a.x + 1) * inv(2 * a.y)) : md((b.y - a.y) * inv(b.x - a.x));
    std::int64_t x3 = md(lam * lam - a.x - b.x);
    return {x3, md(lam * (a.x - x3) - a.y), false};
}

Pt pmul(Pt a, std::int64_t k) {
    Pt r{0, 0, true};
    for (std::int64_t i = 0; i < k; ++i) r = padd(r, a);
    return r;
}

// g_{T,S}(Q') = line through T,S divided by the vertical through T+S, evaluated at Q' = (-xq, i*yq).
C line_ratio(Pt t, Pt s, Pt q) {
    const C X{md(-q.x), 0}, Y{0, q.y};
    Pt sum = padd(t, s);
    C num;
    if (t.x == s.x && md(t.y + s.y) == 0) {
        num = {md(X.a - t.x), 0};  // vertical
        return num;                // sum is infinity: no denominator
    }
    std::int64_t lam = (t.x == s.x) ? md((3 * t.x * t.x + 1) * inv(2 * t.y)) : md((s.y - t.y) * inv(s.x - t.x));
    num = {md(Y.a - t.y - lam * (X.a - t.x)), Y.b};
    C den{md(X.a - sum.x), 0};
    return cmul(num, cinv(den));
}

C oracle_pair(Pt p, Pt q) {
    if (p.inf || q.inf) return {1, 0};
    C f{1, 0};
    Pt t = p;
    for (int i = 2; i >= 0; --i) {  // q = 11 = 0b1011
        f = cmul(cmul(f, f), line_ratio(t, t, q));
        t = padd(t, t);
        if ((kQ >> i) & 1) {
            f = cmul(f, line_ratio(t, p, q));
            t = padd(t, p);
        }
    }
    return cpow(f, (kP * kP - 1) / kQ);
}

Pt to_small(const G1Point& g) {
    if (g.infinity) return {0, 0, true};
    return {g.x.get_si(), g.y.get_si(), false};
}

// ---------------------------------------------------------------------------

const PairingContext& tiny() { return PairingContext::get(CurvePreset::TypeATiny); }
const PairingContext& prod() { return PairingContext::get(CurvePreset::TypeA1536); }

TEST(TinyCurve, PointCountMatchesBruteForceEnumeration) {
    int count = 1;  // identity
    for (int x = 0; x < kP; ++x)
        for (int y = 0; y < kP; ++y)
            if (md(std::int64_t(y) * y) == md(std::int64_t(x) * x * x + x)) ++count;
    EXPECT_EQ(count, 132);
    EXPECT_EQ(mpz_class(count), tiny().cofactor() * tiny().order());
}

TEST(TinyCurve, GeneratorHasPrimeOrder) {
    const auto& ctx = tiny();
    const auto& g = ctx.generator();
    ASSERT_FALSE(g.infinity);
    EXPECT_TRUE(ctx.on_curve(g));
    for (int k = 1; k < 11; ++k) EXPECT_FALSE(ctx.mul(g, k).infinity) << k;
    EXPECT_TRUE(ctx.mul(g, 11).infinity);
}

TEST(TinyCurve, ScalarMultMatchesRepeatedAddition) {
    const auto& ctx = tiny();
    const Pt g = to_small(ctx.generator());
    for (int k = 0; k <= 22; ++k) {
        const Pt want = pmul(g, k);
        const Pt got = to_small(ctx.mul(ctx.generator(), k));
        ASSERT_EQ(want.inf, got.inf) << k;
        if (!want.inf) {
            EXPECT_EQ(want.x, got.x) << k;
            EXPECT_EQ(want.y, got.y) << k;
        }
    }
}

TEST(TinyCurve, PairingMatchesAffineOracleOnWholeGroup) {
    const auto& ctx = tiny();
    for (int a = 0; a < 11; ++a) {
        for (int b = 0; b < 11; ++b) {
            const auto A = ctx.mul(ctx.generator(), a);
            const auto B = ctx.mul(ctx.generator(), b);
            const C want = oracle_pair(to_small(A), to_small(B));
            const auto got = ctx.pair(A, B);
            EXPECT_EQ(got.a.get_si(), want.a) << a << "," << b;
            EXPECT_EQ(got.b.get_si(), want.b) << a << "," << b;
        }
    }
}

TEST(TinyCurve, BilinearExhaustive) {
    const auto& ctx = tiny();
    const auto& P = ctx.generator();
    const auto base = ctx.pair(P, P);
    EXPECT_FALSE(base == ctx.gt_one());  // non-degenerate
    for (int a = 0; a < 11; ++a)
        for (int b = 0; b < 11; ++b)
            EXPECT_EQ(ctx.pair(ctx.mul(P, a), ctx.mul(P, b)), ctx.gt_pow(base, a * b)) << a << "," << b;
}

TEST(TinyCurve, HashToGroupLandsInSubgroup) {
    const auto& ctx = tiny();
    std::set<std::string> distinct;
    for (int i = 0; i < 40; ++i) {
        const std::string msg = "id" + std::to_string(i);
        const auto h = ctx.hash_to_g1("t", as_bytes(msg));
        ASSERT_TRUE(ctx.in_subgroup(h));
        ASSERT_FALSE(h.infinity);
        distinct.insert(to_hex(ctx.encode_g1(h)));
    }
    EXPECT_GT(distinct.size(), 5u);  // 10 non-identity points available
}

TEST(ProductionCurve, ParametersAreConsistent) {
    const auto& ctx = prod();
    EXPECT_EQ(mpz_sizeinbase(ctx.field_modulus().get_mpz_t(), 2), 1536u);
    EXPECT_EQ(mpz_sizeinbase(ctx.order().get_mpz_t(), 2), 256u);
    EXPECT_NE(mpz_probab_prime_p(ctx.field_modulus().get_mpz_t(), 30), 0);
    EXPECT_NE(mpz_probab_prime_p(ctx.order().get_mpz_t(), 30), 0);
    EXPECT_EQ(mpz_fdiv_ui(ctx.field_modulus().get_mpz_t(), 4), 3u);
    EXPECT_TRUE(ctx.in_subgroup(ctx.generator()));
    EXPECT_FALSE(ctx.generator().infinity);
}

TEST(ProductionCurve, BilinearOnRandomSamples) {
    const auto& ctx = prod();
    DeterministicRng rng(99);
    const auto& P = ctx.generator();
    const auto Q = ctx.hash_to_g1("sample", as_bytes("q"));
    const auto base = ctx.pair(P, Q);
    EXPECT_FALSE(base == ctx.gt_one());
    for (int i = 0; i < 3; ++i) {
        const mpz_class a = ctx.random_scalar(rng);
        const mpz_class b = ctx.random_scalar(rng);
        EXPECT_EQ(ctx.pair(ctx.mul(P, a), ctx.mul(Q, b)), ctx.gt_pow(base, a * b));
    }
    // Symmetric pairing.
    EXPECT_EQ(ctx.pair(P, Q), ctx.pair(Q, P));
    // e(P, Q)^q = 1
    EXPECT_EQ(ctx.gt_pow(base, ctx.order()), ctx.gt_one());
}

TEST(ProductionCurve, EncodeDecodeRoundTripAndRejections) {
    const auto& ctx = prod();
    const auto pt = ctx.hash_to_g1("enc", as_bytes("x"));
    const Bytes enc = ctx.encode_g1(pt);
    EXPECT_EQ(enc.size(), ctx.g1_bytes());
    EXPECT_EQ(ctx.decode_g1(enc), pt);
    EXPECT_TRUE(ctx.decode_g1(ctx.encode_g1(G1Point{})).infinity);

    Bytes off = enc;
    off[5] ^= 1;  // x changes: almost surely off the curve
    EXPECT_THROW(ctx.decode_g1(off), Error);
    EXPECT_THROW(ctx.decode_g1(ByteView(enc).first(enc.size() - 1)), MalformedError);
    Bytes bad_tag = enc;
    bad_tag[0] = 0x07;
    EXPECT_THROW(ctx.decode_g1(bad_tag), MalformedError);
}

TEST(TinyCurve, DecodeRejectsPointsOutsideSubgroup) {
    const auto& ctx = tiny();
    // Find a curve point of order not dividing q by brute force.
    for (int x = 0; x < kP; ++x)
        for (int y = 0; y < kP; ++y) {
            if (md(std::int64_t(y) * y) != md(std::int64_t(x) * x * x + x)) continue;
            G1Point pt{x, y, false};
            if (ctx.mul(pt, 11).infinity) continue;
            EXPECT_THROW(ctx.decode_g1(ctx.encode_g1(pt)), Error);
            return;
        }
    FAIL() << "no point outside the subgroup";
}

TEST(ProductionCurve, PairingCostIsDeskScale) {
    const auto& ctx = prod();
    const auto Q = ctx.hash_to_g1("speed", as_bytes("q"));
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < 5; ++i) (void)ctx.pair(ctx.generator(), Q);
    const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count() / 5;
    RecordProperty("pairing_ms", std::to_string(ms));
    std::cout << "pairing: " << ms << " ms\n";
    EXPECT_LT(ms, 200.0);
}

}  // namespace
