#pragma once

#include <cstdint>
#include <limits>
#include <memory>

#include "zephyr/bytes.hpp"

namespace zephyr::crypto {

/// Entropy source. Every random choice in the system goes through one of these.
class Rng {
public:
    using result_type = std::uint64_t;

    virtual ~Rng() = default;
    virtual void fill(std::span<std::uint8_t> out) = 0;

    std::uint64_t next_u64();
    /// Uniform in [0, bound). bound must be nonzero.
    std::uint64_t uniform(std::uint64_t bound);
    double unit();

    template <std::size_t N>
    ByteArray<N> array() {
        ByteArray<N> a{};
        fill(a);
        return a;
    }
    Bytes bytes(std::size_t n);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
    result_type operator()() { return next_u64(); }
};

/// Operating-system entropy.
class OsRng final : public Rng {
public:
    void fill(std::span<std::uint8_t> out) override;
};

/// Seeded keystream generator (XSalsa20 under a key derived from the seed).
/// Identical seeds give identical streams on every platform.
class DeterministicRng final : public Rng {
public:
    explicit DeterministicRng(std::uint64_t seed, std::string_view label = "");
    explicit DeterministicRng(ByteView seed_material);
    void fill(std::span<std::uint8_t> out) override;

    /// Independent child stream; used to hand each simulated node its own generator.
    DeterministicRng fork(std::string_view label);

private:
    ByteArray<32> key_{};
    std::uint64_t block_ = 0;
    ByteArray<64> buffer_{};
    std::size_t used_ = 64;
};

}  // namespace zephyr::crypto
