#include <gtest/gtest.h>
#include <sodium.h>

#include <cstring>
#include <vector>

#include "zephyr/crypto/rng.hpp"
#include "zephyr/crypto/salsa20.hpp"

using namespace zephyr;
using namespace zephyr::crypto;

namespace {

class KernelTest : public ::testing::TestWithParam<Salsa20Kernel> {
protected:
    void SetUp() override { ASSERT_GE(sodium_init(), 0); }
};

TEST_P(KernelTest, MatchesLibsodiumAcrossLengthsAndCounters) {
    DeterministicRng rng(7, "kernels");
    const std::uint64_t counters[] = {0, 1, 7, 0xfffffffbULL, 0xffffffffULL, 0x1234567890ULL};
    for (std::size_t len : {0u, 1u, 63u, 64u, 65u, 255u, 256u, 257u, 511u, 512u, 513u, 1000u, 4096u, 4133u}) {
        for (auto counter : counters) {
            auto key = rng.array<32>();
            auto nonce = rng.array<8>();
            Bytes msg = rng.bytes(len);
            Bytes expected(len), actual(len);
            crypto_stream_salsa20_xor_ic(expected.data(), msg.data(), len, nonce.data(), counter, key.data());
            salsa20_xor_with(GetParam(), actual.data(), msg.data(), len, key.data(), nonce.data(), counter);
            ASSERT_EQ(expected, actual) << "len=" << len << " counter=" << counter;
        }
    }
}

TEST_P(KernelTest, MatchesScalarReference) {
    DeterministicRng rng(11, "scalar-ref");
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t len = rng.uniform(3000);
        auto key = rng.array<32>();
        auto nonce = rng.array<8>();
        const std::uint64_t counter = rng.next_u64();
        Bytes msg = rng.bytes(len);
        Bytes ref(len), out(len);
        salsa20_xor_with(Salsa20Kernel::Scalar, ref.data(), msg.data(), len, key.data(), nonce.data(), counter);
        salsa20_xor_with(GetParam(), out.data(), msg.data(), len, key.data(), nonce.data(), counter);
        ASSERT_EQ(ref, out);
    }
}

TEST_P(KernelTest, InPlaceOperation) {
    DeterministicRng rng(3);
    auto key = rng.array<32>();
    auto nonce = rng.array<8>();
    Bytes msg = rng.bytes(1031);
    Bytes expected(msg.size());
    crypto_stream_salsa20_xor_ic(expected.data(), msg.data(), msg.size(), nonce.data(), 5, key.data());
    salsa20_xor_with(GetParam(), msg.data(), msg.data(), msg.size(), key.data(), nonce.data(), 5);
    EXPECT_EQ(expected, msg);
}

std::string kernel_label(const ::testing::TestParamInfo<Salsa20Kernel>& info) {
    return std::string(kernel_name(info.param));
}

INSTANTIATE_TEST_SUITE_P(AllKernels, KernelTest, ::testing::ValuesIn(available_kernels()), kernel_label);

TEST(Salsa20, ActiveKernelIsWidestAvailable) {
    const auto avail = available_kernels();
    EXPECT_EQ(active_kernel(), avail.back());
}

TEST(Salsa20, HSalsa20MatchesLibsodium) {
    DeterministicRng rng(5);
    for (int i = 0; i < 20; ++i) {
        auto key = rng.array<32>();
        auto in = rng.array<16>();
        std::uint8_t expected[32], actual[32];
        crypto_core_hsalsa20(expected, in.data(), key.data(), nullptr);
        hsalsa20(actual, in.data(), key.data());
        ASSERT_EQ(0, std::memcmp(expected, actual, 32));
    }
}

TEST(Salsa20, XSalsa20MatchesLibsodium) {
    DeterministicRng rng(6);
    for (std::size_t len : {0u, 17u, 64u, 700u, 2049u}) {
        auto key = rng.array<32>();
        auto nonce = rng.array<24>();
        Bytes msg = rng.bytes(len), expected(len), actual(len);
        crypto_stream_xsalsa20_xor_ic(expected.data(), msg.data(), len, nonce.data(), 3, key.data());
        xsalsa20_xor(actual.data(), msg.data(), len, key.data(), nonce.data(), 3);
        ASSERT_EQ(expected, actual);
    }
}

TEST(DeterministicRng, SameSeedSameStream) {
    DeterministicRng a(42, "x"), b(42, "x"), c(43, "x"), d(42, "y");
    const auto va = a.bytes(200);
    EXPECT_EQ(va, b.bytes(200));
    EXPECT_NE(va, c.bytes(200));
    EXPECT_NE(va, d.bytes(200));
}

TEST(DeterministicRng, UniformStaysInRange) {
    DeterministicRng rng(1);
    std::vector<int> counts(7, 0);
    for (int i = 0; i < 7000; ++i) ++counts[rng.uniform(7)];
    for (int c : counts) EXPECT_GT(c, 800);
}

}  // namespace
