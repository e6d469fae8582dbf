#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

#include "zephyr/bytes.hpp"
#include "zephyr/crypto/rng.hpp"

namespace zephyr::crypto {

/// Supersingular curves E: y^2 = x^3 + x over F_p with p = 3 (mod 4) and
/// #E(F_p) = p + 1 = h * q. The symmetric pairing G1 x G1 -> GT is the reduced
/// Tate pairing composed with the distortion map (x, y) -> (-x, i*y), GT being
/// the order-q subgroup of F_p^2 = F_p[i] / (i^2 + 1).
enum class CurvePreset : std::uint8_t {
    /// 1536-bit p, 256-bit q. Production parameters.
    TypeA1536 = 1,
    /// p = 131, q = 11, h = 12. Small enough to enumerate the whole group in tests.
    TypeATiny = 2,
};

std::string_view preset_name(CurvePreset preset);
CurvePreset preset_from_name(std::string_view name);

/// Affine point of G1; `infinity` marks the identity.
struct G1Point {
    mpz_class x;
    mpz_class y;
    bool infinity = true;

    friend bool operator==(const G1Point& a, const G1Point& b) {
        if (a.infinity || b.infinity) return a.infinity == b.infinity;
        return a.x == b.x && a.y == b.y;
    }
};

/// Element a + b*i of F_p^2 (GT elements are unitary: a^2 + b^2 = 1).
struct GtElement {
    mpz_class a;
    mpz_class b;

    friend bool operator==(const GtElement& l, const GtElement& r) { return l.a == r.a && l.b == r.b; }
};

class PairingContext {
public:
    static const PairingContext& get(CurvePreset preset);

    CurvePreset preset() const { return preset_; }
    const mpz_class& field_modulus() const { return p_; }
    const mpz_class& order() const { return q_; }
    const mpz_class& cofactor() const { return h_; }
    const G1Point& generator() const { return generator_; }

    /// Fixed byte width of one encoded field element.
    std::size_t field_bytes() const { return field_bytes_; }
    std::size_t g1_bytes() const { return 1 + 2 * field_bytes_; }
    std::size_t gt_bytes() const { return 2 * field_bytes_; }

    bool on_curve(const G1Point& pt) const;
    bool in_subgroup(const G1Point& pt) const;

    G1Point add(const G1Point& a, const G1Point& b) const;
    G1Point negate(const G1Point& a) const;
    G1Point mul(const G1Point& pt, const mpz_class& k) const;

    GtElement pair(const G1Point& a, const G1Point& b) const;
    GtElement gt_one() const;
    GtElement gt_mul(const GtElement& a, const GtElement& b) const;
    GtElement gt_pow(const GtElement& g, const mpz_class& k) const;

    /// Hash-then-map into the order-q subgroup (try-and-increment, then cofactor clearing).
    G1Point hash_to_g1(std::string_view tag, ByteView message) const;

    /// Uniform scalar in [1, q-1].
    mpz_class random_scalar(Rng& rng) const;

    Bytes encode_g1(const G1Point& pt) const;
    /// Rejects points off the curve or outside the order-q subgroup.
    G1Point decode_g1(ByteView bytes) const;
    Bytes encode_gt(const GtElement& g) const;

    Bytes encode_scalar(const mpz_class& k) const;
    mpz_class decode_scalar(ByteView bytes) const;
    std::size_t scalar_bytes() const { return scalar_bytes_; }

private:
    PairingContext(CurvePreset preset, const char* p_hex, const char* q_hex, const char* h_hex);

    class Engine;

    CurvePreset preset_;
    mpz_class p_;
    mpz_class q_;
    mpz_class h_;
    mpz_class sqrt_exp_;  // (p + 1) / 4
    std::size_t field_bytes_;
    std::size_t scalar_bytes_;
    std::shared_ptr<const Engine> engine_;
    G1Point generator_;

    Bytes encode_fp(const mpz_class& v) const;
    mpz_class decode_fp(ByteView bytes, std::size_t offset) const;
};

}  // namespace zephyr::crypto
