#include "zephyr/crypto/pairing.hpp"

#include <cstring>

#include "mont_field.hpp"
#include "zephyr/crypto/hash.hpp"
#include "zephyr/error.hpp"

namespace zephyr::crypto {
namespace {

// Generated by tools/gen_pairing_params.py: q is a 256-bit Solinas prime,
// p = h*q - 1 is a 1536-bit prime with p = 3 (mod 4).
constexpr const char* kP1536 =
    "c000000000004000000000000000000000000000000000000000000000000001"
    "0000000000000000000000000000000000000000000000000000000000000000"
    "0000000000000000000000000000000000000000000000000000000000000000"
    "0000000000000000000000000000000000000000000000000000000000000000"
    "000000000000000000000000000000000000000000000000000000000000048f"
    "0000000001850000000000000000000000000000000000000000000000000613";
constexpr const char* kQ1536 =
    "c000000000004000000000000000000000000000000000000000000000000001";
constexpr const char* kH1536 =
    "1"
    "0000000000000000000000000000000000000000000000000000000000000000"
    "0000000000000000000000000000000000000000000000000000000000000000"
    "0000000000000000000000000000000000000000000000000000000000000000"
    "0000000000000000000000000000000000000000000000000000000000000000"
    "0000000000000000000000000000000000000000000000000000000000000614";

mpz_class from_hex_str(const char* hex) { return mpz_class(hex, 16); }

std::size_t byte_len(const mpz_class& v) { return (mpz_sizeinbase(v.get_mpz_t(), 2) + 7) / 8; }

}  // namespace

using detail::Fe;
using detail::MontField;

class PairingContext::Engine {
public:
    struct Affine {
        Fe x, y;
        bool inf = true;
    };
    struct Jac {
        Fe X, Y, Z;  // Z == 0 is the identity
    };
    struct F2 {
        Fe a, b;
    };

    Engine(const mpz_class& p, const mpz_class& q, const mpz_class& h) : F(p), q_(q), h_(h) {}

    const MontField F;

    Affine in(const G1Point& pt) const {
        Affine a;
        a.inf = pt.infinity;
        if (!a.inf) {
            a.x = F.from_mpz(pt.x);
            a.y = F.from_mpz(pt.y);
        }
        return a;
    }
    G1Point out(const Affine& a) const {
        if (a.inf) return G1Point{};
        return G1Point{F.to_mpz(a.x), F.to_mpz(a.y), false};
    }
    F2 in(const GtElement& g) const { return F2{F.from_mpz(g.a), F.from_mpz(g.b)}; }
    GtElement out(const F2& g) const { return GtElement{F.to_mpz(g.a), F.to_mpz(g.b)}; }

    void dbl(Jac& t) const {
        if (F.is_zero(t.Z)) return;
        if (F.is_zero(t.Y)) {
            t.Z = Fe{};
            return;
        }
        Fe XX, YY, YYYY, ZZ, S, M, tmp;
        F.sqr(XX, t.X);
        F.sqr(YY, t.Y);
        F.sqr(YYYY, YY);
        F.sqr(ZZ, t.Z);
        F.mul(S, t.X, YY);
        F.add(S, S, S);
        F.add(S, S, S);  // 4 X YY
        F.sqr(M, ZZ);    // a * ZZ^2 with a = 1
        F.add(M, M, XX);
        F.add(M, M, XX);
        F.add(M, M, XX);
        F.mul(t.Z, t.Y, t.Z);
        F.add(t.Z, t.Z, t.Z);  // Z3 = 2 Y Z
        F.sqr(t.X, M);
        F.sub(t.X, t.X, S);
        F.sub(t.X, t.X, S);  // X3 = M^2 - 2S
        F.sub(tmp, S, t.X);
        F.mul(t.Y, M, tmp);
        F.add(YYYY, YYYY, YYYY);
        F.add(YYYY, YYYY, YYYY);
        F.add(YYYY, YYYY, YYYY);
        F.sub(t.Y, t.Y, YYYY);  // Y3 = M (S - X3) - 8 YYYY
    }

    void add_affine(Jac& t, const Affine& a) const {
        if (a.inf) return;
        if (F.is_zero(t.Z)) {
            t = Jac{a.x, a.y, F.one()};
            return;
        }
        Fe Z1Z1, U2, S2, H, r, HH, HHH, V, tmp;
        F.sqr(Z1Z1, t.Z);
        F.mul(U2, a.x, Z1Z1);
        F.mul(S2, a.y, t.Z);
        F.mul(S2, S2, Z1Z1);
        F.sub(H, U2, t.X);
        F.sub(r, S2, t.Y);
        if (F.is_zero(H)) {
            if (F.is_zero(r)) {
                dbl(t);
            } else {
                t.Z = Fe{};
            }
            return;
        }
        F.sqr(HH, H);
        F.mul(HHH, H, HH);
        F.mul(V, t.X, HH);
        F.sqr(tmp, r);
        F.sub(tmp, tmp, HHH);
        F.sub(tmp, tmp, V);
        F.sub(tmp, tmp, V);  // X3 = r^2 - HHH - 2V
        F.sub(V, V, tmp);
        F.mul(V, r, V);
        F.mul(HHH, t.Y, HHH);
        F.sub(t.Y, V, HHH);  // Y3 = r (V - X3) - Y1 HHH
        t.X = tmp;
        F.mul(t.Z, t.Z, H);
    }

    Affine affine(const Jac& t) const {
        Affine out;
        if (F.is_zero(t.Z)) return out;
        Fe zi, zi2, zi3;
        F.inv(zi, t.Z);
        F.sqr(zi2, zi);
        F.mul(zi3, zi2, zi);
        F.mul(out.x, t.X, zi2);
        F.mul(out.y, t.Y, zi3);
        out.inf = false;
        return out;
    }

    Affine neg(const Affine& a) const {
        Affine r = a;
        if (!a.inf) F.neg(r.y, a.y);
        return r;
    }

    Affine mul(const Affine& pt, const mpz_class& k) const {
        if (pt.inf || k == 0) return Affine{};
        const mpz_class e = abs(k);
        const Affine base = k < 0 ? neg(pt) : pt;
        Jac t{Fe{}, F.one(), Fe{}};
        for (long i = static_cast<long>(mpz_sizeinbase(e.get_mpz_t(), 2)) - 1; i >= 0; --i) {
            dbl(t);
            if (mpz_tstbit(e.get_mpz_t(), static_cast<mp_bitcnt_t>(i))) add_affine(t, base);
        }
        return affine(t);
    }

    void f2_mul(F2& r, const F2& x, const F2& y) const {
        // (a + bi)(c + di) = (ac - bd) + ((a + b)(c + d) - ac - bd) i
        Fe ac, bd, s1, s2;
        F.mul(ac, x.a, y.a);
        F.mul(bd, x.b, y.b);
        F.add(s1, x.a, x.b);
        F.add(s2, y.a, y.b);
        F.mul(s1, s1, s2);
        F.sub(s1, s1, ac);
        F.sub(r.b, s1, bd);
        F.sub(r.a, ac, bd);
    }

    void f2_sqr(F2& r, const F2& x) const {
        // (a + bi)^2 = (a + b)(a - b) + 2ab i
        Fe s, d, ab;
        F.add(s, x.a, x.b);
        F.sub(d, x.a, x.b);
        F.mul(ab, x.a, x.b);
        F.mul(r.a, s, d);
        F.add(r.b, ab, ab);
    }

    void unitary_sqr(F2& r, const F2& x) const {
        // With a^2 + b^2 = 1: real part 2a^2 - 1, imaginary part 2ab = (a + b)^2 - 1.
        Fe aa, s;
        F.sqr(aa, x.a);
        F.add(s, x.a, x.b);
        F.sqr(s, s);
        F.add(aa, aa, aa);
        F.sub(r.a, aa, F.one());
        F.sub(r.b, s, F.one());
    }

    F2 unitary_pow(const F2& g, const mpz_class& k) const {
        F2 acc{F.one(), Fe{}};
        const mpz_class e = abs(k);
        F2 base = g;
        if (k < 0) F.neg(base.b, base.b);  // inverse of a unitary element is its conjugate
        for (long i = static_cast<long>(mpz_sizeinbase(e.get_mpz_t(), 2)) - 1; i >= 0; --i) {
            unitary_sqr(acc, acc);
            if (mpz_tstbit(e.get_mpz_t(), static_cast<mp_bitcnt_t>(i))) f2_mul(acc, acc, base);
        }
        if (e == 0) acc = F2{F.one(), Fe{}};
        return acc;
    }

    F2 final_exponentiation(const F2& f) const {
        // f^(p-1) = conj(f)^2 / N(f); the result is unitary, then raise to h = (p+1)/q.
        Fe norm, tmp, inv;
        F.sqr(norm, f.a);
        F.sqr(tmp, f.b);
        F.add(norm, norm, tmp);
        F.inv(inv, norm);
        F2 c{f.a, Fe{}};
        F.neg(c.b, f.b);
        F2 g;
        f2_sqr(g, c);
        F.mul(g.a, g.a, inv);
        F.mul(g.b, g.b, inv);
        return unitary_pow(g, h_);
    }

    F2 pair(const Affine& P, const Affine& Q) const {
        if (P.inf || Q.inf) return F2{F.one(), Fe{}};
        // Q goes through the distortion map to (-xq, i*yq); line values are
        // computed up to F_p factors, which the final exponentiation removes.
        F2 f{F.one(), Fe{}};
        Jac T{P.x, P.y, F.one()};
        F2 line, sq;
        Fe XX, YY, ZZ, M, tmp, tmp2, Z1Z1, U2, S2, H, R;
        const long top = static_cast<long>(mpz_sizeinbase(q_.get_mpz_t(), 2)) - 2;
        for (long i = top; i >= 0; --i) {
            // Tangent at T: real = M (xq ZZ + X) - 2 YY, imag = 2 Y Z * ZZ * yq.
            F.sqr(XX, T.X);
            F.sqr(YY, T.Y);
            F.sqr(ZZ, T.Z);
            F.sqr(M, ZZ);
            F.add(M, M, XX);
            F.add(M, M, XX);
            F.add(M, M, XX);
            F.mul(tmp, Q.x, ZZ);
            F.add(tmp, tmp, T.X);
            F.mul(line.a, M, tmp);
            F.sub(line.a, line.a, YY);
            F.sub(line.a, line.a, YY);
            F.mul(tmp2, T.Y, T.Z);
            F.add(tmp2, tmp2, tmp2);  // 2 Y Z, also the doubled Z
            F.mul(tmp, tmp2, ZZ);
            F.mul(line.b, tmp, Q.y);
            f2_sqr(sq, f);
            f2_mul(f, sq, line);
            // Doubling reuses XX, YY, M: S = 4 X YY, X3 = M^2 - 2S, Y3 = M (S - X3) - 8 YY^2.
            F.mul(tmp, T.X, YY);
            F.add(tmp, tmp, tmp);
            F.add(tmp, tmp, tmp);
            F.sqr(T.X, M);
            F.sub(T.X, T.X, tmp);
            F.sub(T.X, T.X, tmp);
            F.sub(tmp, tmp, T.X);
            F.sqr(YY, YY);
            F.add(YY, YY, YY);
            F.add(YY, YY, YY);
            F.add(YY, YY, YY);
            F.mul(T.Y, M, tmp);
            F.sub(T.Y, T.Y, YY);
            T.Z = tmp2;

            if (mpz_tstbit(q_.get_mpz_t(), static_cast<mp_bitcnt_t>(i))) {
                // Chord through T and P: real = N (xq + xp) - M' yp, imag = M' yq,
                // N = yp Z^3 - Y, M' = Z (xp Z^2 - X).
                F.sqr(Z1Z1, T.Z);
                F.mul(U2, P.x, Z1Z1);
                F.mul(S2, P.y, T.Z);
                F.mul(S2, S2, Z1Z1);
                F.sub(H, U2, T.X);
                F.sub(R, S2, T.Y);
                if (F.is_zero(H)) {
                    // T = -P: vertical line, an F_p value.
                    add_affine(T, P);
                    continue;
                }
                F.mul(tmp2, T.Z, H);
                F.add(tmp, Q.x, P.x);
                F.mul(line.a, R, tmp);
                F.mul(tmp, tmp2, P.y);
                F.sub(line.a, line.a, tmp);
                F.mul(line.b, tmp2, Q.y);
                f2_mul(f, f, line);
                add_affine(T, P);
            }
        }
        return final_exponentiation(f);
    }

private:
    mpz_class q_;
    mpz_class h_;
};

std::string_view preset_name(CurvePreset preset) {
    switch (preset) {
        case CurvePreset::TypeA1536:
            return "type-a-1536";
        case CurvePreset::TypeATiny:
            return "type-a-tiny";
    }
    return "?";
}

CurvePreset preset_from_name(std::string_view name) {
    if (name == "type-a-1536") return CurvePreset::TypeA1536;
    if (name == "type-a-tiny") return CurvePreset::TypeATiny;
    throw Error(Errc::InvalidArgument, "unknown curve preset: " + std::string(name));
}

const PairingContext& PairingContext::get(CurvePreset preset) {
    switch (preset) {
        case CurvePreset::TypeA1536: {
            static const PairingContext ctx(preset, kP1536, kQ1536, kH1536);
            return ctx;
        }
        case CurvePreset::TypeATiny: {
            static const PairingContext ctx(preset, "83", "b", "c");
            return ctx;
        }
    }
    throw Error(Errc::InvalidArgument, "unknown curve preset");
}

PairingContext::PairingContext(CurvePreset preset, const char* p_hex, const char* q_hex, const char* h_hex)
    : preset_(preset), p_(from_hex_str(p_hex)), q_(from_hex_str(q_hex)), h_(from_hex_str(h_hex)) {
    if (p_ + 1 != h_ * q_) throw Error(Errc::InvariantViolation, "curve parameters: p + 1 != h * q");
    sqrt_exp_ = (p_ + 1) / 4;
    field_bytes_ = byte_len(p_);
    scalar_bytes_ = byte_len(q_);
    engine_ = std::make_shared<const Engine>(p_, q_, h_);
    generator_ = hash_to_g1("zephyr-generator", {});
}

// ---------------------------------------------------------------------------
// Public group operations

bool PairingContext::on_curve(const G1Point& pt) const {
    if (pt.infinity) return true;
    if (pt.x < 0 || pt.x >= p_ || pt.y < 0 || pt.y >= p_) return false;
    const mpz_class lhs = pt.y * pt.y % p_;
    const mpz_class rhs = (pt.x * pt.x * pt.x + pt.x) % p_;
    return lhs == rhs;
}

bool PairingContext::in_subgroup(const G1Point& pt) const { return on_curve(pt) && mul(pt, q_).infinity; }

G1Point PairingContext::negate(const G1Point& a) const {
    if (a.infinity || a.y == 0) return a;
    return G1Point{a.x, p_ - a.y, false};
}

G1Point PairingContext::add(const G1Point& a, const G1Point& b) const {
    if (a.infinity) return b;
    if (b.infinity) return a;
    const auto& E = *engine_;
    const auto A = E.in(a);
    Engine::Jac t{A.x, A.y, E.F.one()};
    E.add_affine(t, E.in(b));
    return E.out(E.affine(t));
}

G1Point PairingContext::mul(const G1Point& pt, const mpz_class& k) const {
    const auto& E = *engine_;
    return E.out(E.mul(E.in(pt), k));
}

G1Point PairingContext::hash_to_g1(std::string_view tag, ByteView message) const {
    mpz_class x, rhs, y;
    for (std::uint32_t ctr = 0;; ++ctr) {
        std::uint8_t c[4] = {std::uint8_t(ctr), std::uint8_t(ctr >> 8), std::uint8_t(ctr >> 16),
                             std::uint8_t(ctr >> 24)};
        const Bytes wide = expand(tag, {message, ByteView(c, 4)}, field_bytes_ + 17);
        mpz_import(x.get_mpz_t(), wide.size() - 1, -1, 1, 0, 0, wide.data());
        mpz_mod(x.get_mpz_t(), x.get_mpz_t(), p_.get_mpz_t());
        rhs = (x * x * x + x) % p_;
        if (rhs == 0 || mpz_legendre(rhs.get_mpz_t(), p_.get_mpz_t()) != 1) continue;
        mpz_powm(y.get_mpz_t(), rhs.get_mpz_t(), sqrt_exp_.get_mpz_t(), p_.get_mpz_t());
        if ((wide.back() & 1) != mpz_odd_p(y.get_mpz_t())) y = p_ - y;
        const G1Point cleared = mul(G1Point{x, y, false}, h_);
        if (!cleared.infinity) return cleared;
    }
}

mpz_class PairingContext::random_scalar(Rng& rng) const {
    const Bytes wide = rng.bytes(scalar_bytes_ + 16);
    mpz_class v;
    mpz_import(v.get_mpz_t(), wide.size(), -1, 1, 0, 0, wide.data());
    const mpz_class qm1 = q_ - 1;
    mpz_mod(v.get_mpz_t(), v.get_mpz_t(), qm1.get_mpz_t());
    return v + 1;
}

GtElement PairingContext::pair(const G1Point& a, const G1Point& b) const {
    const auto& E = *engine_;
    return E.out(E.pair(E.in(a), E.in(b)));
}

GtElement PairingContext::gt_one() const { return GtElement{1, 0}; }

GtElement PairingContext::gt_mul(const GtElement& x, const GtElement& y) const {
    const auto& E = *engine_;
    Engine::F2 r;
    E.f2_mul(r, E.in(x), E.in(y));
    return E.out(r);
}

GtElement PairingContext::gt_pow(const GtElement& g, const mpz_class& k) const {
    mpz_class e;
    mpz_mod(e.get_mpz_t(), k.get_mpz_t(), q_.get_mpz_t());
    const auto& E = *engine_;
    return E.out(E.unitary_pow(E.in(g), e));
}

// ---------------------------------------------------------------------------
// Encoding: little-endian fixed-width field elements.

Bytes PairingContext::encode_fp(const mpz_class& v) const {
    Bytes out(field_bytes_, 0);
    std::size_t count = 0;
    mpz_export(out.data(), &count, -1, 1, 0, 0, v.get_mpz_t());
    return out;
}

mpz_class PairingContext::decode_fp(ByteView bytes, std::size_t offset) const {
    mpz_class v;
    mpz_import(v.get_mpz_t(), bytes.size(), -1, 1, 0, 0, bytes.data());
    if (v >= p_) throw MalformedError(offset, "field element out of range");
    return v;
}

Bytes PairingContext::encode_g1(const G1Point& pt) const {
    Bytes out;
    out.reserve(g1_bytes());
    if (pt.infinity) {
        out.assign(g1_bytes(), 0);
        return out;
    }
    out.push_back(0x04);
    append(out, encode_fp(pt.x));
    append(out, encode_fp(pt.y));
    return out;
}

G1Point PairingContext::decode_g1(ByteView bytes) const {
    if (bytes.size() != g1_bytes()) throw MalformedError(std::min(bytes.size(), g1_bytes()), "G1 element size");
    if (bytes[0] == 0) {
        for (std::size_t i = 1; i < bytes.size(); ++i)
            if (bytes[i] != 0) throw MalformedError(i, "non-canonical identity encoding");
        return G1Point{};
    }
    if (bytes[0] != 0x04) throw MalformedError(0, "unknown G1 encoding tag");
    G1Point pt;
    pt.infinity = false;
    pt.x = decode_fp(bytes.subspan(1, field_bytes_), 1);
    pt.y = decode_fp(bytes.subspan(1 + field_bytes_, field_bytes_), 1 + field_bytes_);
    if (!on_curve(pt)) throw Error(Errc::DecodeError, "point not on curve");
    if (!mul(pt, q_).infinity) throw Error(Errc::DecodeError, "point outside the order-q subgroup");
    return pt;
}

Bytes PairingContext::encode_gt(const GtElement& g) const {
    Bytes out = encode_fp(g.a);
    append(out, encode_fp(g.b));
    return out;
}

Bytes PairingContext::encode_scalar(const mpz_class& k) const {
    Bytes out(scalar_bytes_, 0);
    std::size_t count = 0;
    mpz_export(out.data(), &count, -1, 1, 0, 0, k.get_mpz_t());
    return out;
}

mpz_class PairingContext::decode_scalar(ByteView bytes) const {
    if (bytes.size() != scalar_bytes_) throw MalformedError(0, "scalar size");
    mpz_class v;
    mpz_import(v.get_mpz_t(), bytes.size(), -1, 1, 0, 0, bytes.data());
    if (v >= q_) throw MalformedError(0, "scalar out of range");
    return v;
}

}  // namespace zephyr::crypto
