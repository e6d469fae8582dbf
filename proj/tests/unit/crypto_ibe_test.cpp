#include <gtest/gtest.h>

#include <set>

#include "zephyr/crypto/ibe.hpp"
#include "zephyr/error.hpp"

using namespace zephyr;
using namespace zephyr::crypto;

namespace {

struct IbeTest : ::testing::Test {
    DeterministicRng rng{1234, "ibe"};
    MasterKeyPair master = ibe_setup(rng);
};

TEST_F(IbeTest, SetupPublicKeyIsMasterSecretTimesGenerator) {
    const auto& ctx = master.mpk.context();
    EXPECT_EQ(master.mpk.p_pub, ctx.mul(ctx.generator(), master.msk));
    EXPECT_GE(master.msk, 1);
    EXPECT_LT(master.msk, ctx.order());
}

TEST_F(IbeTest, SetupDeterministicUnderFixedSeedAndDistinctOtherwise) {
    DeterministicRng a(5), b(5), c(6);
    const auto ka = ibe_setup(a), kb = ibe_setup(b), kc = ibe_setup(c);
    EXPECT_EQ(ka.msk, kb.msk);
    EXPECT_EQ(ka.mpk, kb.mpk);
    EXPECT_NE(ka.msk, kc.msk);
    OsRng os;
    EXPECT_NE(ibe_setup(os).msk, ibe_setup(os).msk);
}

TEST_F(IbeTest, ExtractedKeyPassesVerificationEquation) {
    const auto key = ibe_extract(master, "alice@example.com");
    EXPECT_TRUE(ibe_verify_key(master.mpk, key));
    const auto again = ibe_extract(master, "alice@example.com");
    EXPECT_EQ(key.d_id, again.d_id);
}

TEST_F(IbeTest, VerificationFailsUnderAnotherMaster) {
    DeterministicRng other_rng(77);
    const auto other = ibe_setup(other_rng);
    const auto key = ibe_extract(other, "a@b");
    EXPECT_FALSE(ibe_verify_key(master.mpk, key));
}

TEST_F(IbeTest, CaseFoldingGivesSameKey) {
    EXPECT_EQ(ibe_extract(master, "Alice@Example.COM").d_id, ibe_extract(master, "alice@example.com").d_id);
    EXPECT_EQ(fold_identity("Alice@Example.COM"), "alice@example.com");
}

TEST_F(IbeTest, EmptyIdentityRejected) {
    try {
        ibe_extract(master, "");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::InvalidIdentity);
    }
}

TEST_F(IbeTest, RoundTripAndWrongIdentity) {
    const Bytes m = rng.bytes(32);
    const auto c = ibe_encrypt(master.mpk, "bob@example.com", m, rng);
    EXPECT_EQ(ibe_decrypt(ibe_extract(master, "bob@example.com"), c), m);
    EXPECT_NE(ibe_decrypt(ibe_extract(master, "carol@example.com"), c), m);
}

TEST_F(IbeTest, AllZeroPlaintext) {
    const Bytes zero(32, 0);
    const auto c = ibe_encrypt(master.mpk, "z@z", zero, rng);
    EXPECT_EQ(ibe_decrypt(ibe_extract(master, "z@z"), c), zero);
}

TEST_F(IbeTest, EncryptionIsProbabilistic) {
    const Bytes m(16, 7);
    const auto c1 = ibe_encrypt(master.mpk, "x@y", m, rng);
    const auto c2 = ibe_encrypt(master.mpk, "x@y", m, rng);
    EXPECT_FALSE(c1.u == c2.u);
}

TEST_F(IbeTest, OversizedPlaintextRejected) {
    try {
        ibe_encrypt(master.mpk, "x@y", Bytes(33), rng);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::PayloadTooLong);
    }
}

TEST(IbeTiny, ExhaustiveIdentitySweepRoundTrips) {
    DeterministicRng rng(3);
    const auto master = ibe_setup(rng, CurvePreset::TypeATiny);
    for (int i = 0; i < 50; ++i) {
        const std::string id = "user" + std::to_string(i) + "@tiny";
        const auto key = ibe_extract(master, id);
        ASSERT_TRUE(ibe_verify_key(master.mpk, key));
        const Bytes m = rng.bytes(32);
        ASSERT_EQ(ibe_decrypt(key, ibe_encrypt(master.mpk, id, m, rng)), m);
    }
}

}  // namespace
