#pragma once

#include <gmp.h>
#include <gmpxx.h>

#include <array>
#include <cstring>

namespace zephyr::crypto::detail {

inline constexpr std::size_t kMaxLimbs = 24;  // 1536 bits

/// Field element in Montgomery form; only the first `n` limbs are meaningful.
struct Fe {
    std::array<mp_limb_t, kMaxLimbs> v{};
};

/// Montgomery arithmetic modulo an odd prime on GMP's mpn layer. No allocation
/// on the arithmetic paths.
class MontField {
public:
    explicit MontField(const mpz_class& p) : n_(mpz_size(p.get_mpz_t())), p_mpz_(p) {
        for (std::size_t i = 0; i < n_; ++i) p_.v[i] = mpz_getlimbn(p.get_mpz_t(), static_cast<mp_size_t>(i));
        mp_limb_t inv = 1;
        for (int i = 0; i < 7; ++i) inv *= 2 - p_.v[0] * inv;
        pinv_ = ~inv + 1;
        mpz_class r2 = 1;
        r2 <<= static_cast<mp_bitcnt_t>(128 * n_);
        r2 %= p;
        load(r2_, r2);
        mpz_class r1 = 1;
        r1 <<= static_cast<mp_bitcnt_t>(64 * n_);
        r1 %= p;
        load(one_, r1);
    }

    std::size_t limbs() const { return n_; }
    const Fe& one() const { return one_; }
    Fe zero() const { return Fe{}; }

    void mul(Fe& r, const Fe& a, const Fe& b) const {
        mp_limb_t t[2 * kMaxLimbs + 1];
        if (&a == &b) {
            mpn_sqr(t, a.v.data(), static_cast<mp_size_t>(n_));
        } else {
            mpn_mul_n(t, a.v.data(), b.v.data(), static_cast<mp_size_t>(n_));
        }
        redc(r, t);
    }
    void sqr(Fe& r, const Fe& a) const { mul(r, a, a); }

    void add(Fe& r, const Fe& a, const Fe& b) const {
        const auto n = static_cast<mp_size_t>(n_);
        const mp_limb_t c = mpn_add_n(r.v.data(), a.v.data(), b.v.data(), n);
        if (c || mpn_cmp(r.v.data(), p_.v.data(), n) >= 0) mpn_sub_n(r.v.data(), r.v.data(), p_.v.data(), n);
    }
    void sub(Fe& r, const Fe& a, const Fe& b) const {
        const auto n = static_cast<mp_size_t>(n_);
        if (mpn_sub_n(r.v.data(), a.v.data(), b.v.data(), n)) mpn_add_n(r.v.data(), r.v.data(), p_.v.data(), n);
    }
    void neg(Fe& r, const Fe& a) const {
        if (is_zero(a)) {
            r = a;
            return;
        }
        mpn_sub_n(r.v.data(), p_.v.data(), a.v.data(), static_cast<mp_size_t>(n_));
    }
    bool is_zero(const Fe& a) const {
        for (std::size_t i = 0; i < n_; ++i)
            if (a.v[i]) return false;
        return true;
    }
    bool eq(const Fe& a, const Fe& b) const {
        return mpn_cmp(a.v.data(), b.v.data(), static_cast<mp_size_t>(n_)) == 0;
    }

    Fe from_mpz(const mpz_class& x) const {
        Fe plain;
        mpz_class reduced = x % p_mpz_;
        if (reduced < 0) reduced += p_mpz_;
        load(plain, reduced);
        Fe out;
        mul(out, plain, r2_);
        return out;
    }
    mpz_class to_mpz(const Fe& a) const {
        mp_limb_t t[2 * kMaxLimbs + 1] = {};
        std::memcpy(t, a.v.data(), n_ * sizeof(mp_limb_t));
        Fe plain;
        redc(plain, t);
        mpz_class out;
        mpz_import(out.get_mpz_t(), n_, -1, sizeof(mp_limb_t), 0, 0, plain.v.data());
        return out;
    }
    void inv(Fe& r, const Fe& a) const {
        mpz_class x = to_mpz(a), y;
        mpz_invert(y.get_mpz_t(), x.get_mpz_t(), p_mpz_.get_mpz_t());
        r = from_mpz(y);
    }

private:
    void load(Fe& out, const mpz_class& x) const {
        out = Fe{};
        for (std::size_t i = 0; i < n_; ++i) out.v[i] = mpz_getlimbn(x.get_mpz_t(), static_cast<mp_size_t>(i));
    }

    // t holds 2n limbs; result = t * R^-1 mod p.
    void redc(Fe& r, mp_limb_t* t) const {
        const auto n = static_cast<mp_size_t>(n_);
        mp_limb_t carries[kMaxLimbs];
        for (std::size_t i = 0; i < n_; ++i) {
            const mp_limb_t m = t[i] * pinv_;
            carries[i] = mpn_addmul_1(t + i, p_.v.data(), n, m);
        }
        t[2 * n_] = mpn_add_n(t + n_, t + n_, carries, n);
        if (t[2 * n_] || mpn_cmp(t + n_, p_.v.data(), n) >= 0) {
            mpn_sub_n(r.v.data(), t + n_, p_.v.data(), n);
        } else {
            std::memcpy(r.v.data(), t + n_, n_ * sizeof(mp_limb_t));
        }
    }

    std::size_t n_;
    mpz_class p_mpz_;
    Fe p_;
    Fe r2_;
    Fe one_;
    mp_limb_t pinv_;
};

}  // namespace zephyr::crypto::detail
