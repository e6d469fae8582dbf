#include <gtest/gtest.h>

#include <set>

#include "support/golden.hpp"
#include "zephyr/envelope.hpp"
#include "zephyr/error.hpp"

using namespace zephyr;
using namespace zephyr::envelope;
using crypto::CurvePreset;
using crypto::DeterministicRng;

namespace {

MailboxId mailbox_one() {
    MailboxId id{};
    id[31] = 1;
    return id;
}

struct EnvelopeTest : ::testing::Test {
    DeterministicRng rng{77, "envelope"};
    crypto::MasterKeyPair master = crypto::ibe_setup(rng);
};

struct Mixers {
    std::vector<MixerKeyPair> keys;
    std::vector<RouteHop> route;

    Mixers(crypto::Rng& rng, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            NodeId id = NodeId::of("mixer", as_bytes(std::to_string(i)));
            keys.push_back(MixerKeyPair::generate(rng, id));
            route.push_back(RouteHop{Address::mixer("mix" + std::to_string(i), std::uint16_t(7000 + i)),
                                     keys.back().public_key});
        }
    }
};

TEST_F(EnvelopeTest, SealOpenRoundTrip) {
    const Bytes m = to_bytes("hello bob");
    const auto sealed = seal_to_recipient(master.mpk, "bob@x.org", m, rng);
    const auto opened = open_as_recipient(crypto::ibe_extract(master, "bob@x.org"), sealed);
    ASSERT_TRUE(opened.has_value());
    EXPECT_EQ(*opened, m);
}

TEST_F(EnvelopeTest, SameMessageTwiceSharesDigestButNotCiphertext) {
    const Bytes m = to_bytes("same");
    const auto a = seal_to_recipient(master.mpk, "bob@x.org", m, rng);
    const auto b = seal_to_recipient(master.mpk, "bob@x.org", m, rng);
    EXPECT_FALSE(a.enc_digest == b.enc_digest);
    const auto key = crypto::ibe_extract(master, "bob@x.org");
    EXPECT_EQ(crypto::ibe_decrypt(key, a.enc_digest), crypto::ibe_decrypt(key, b.enc_digest));
}

TEST_F(EnvelopeTest, OneMebibyteMessage) {
    const Bytes m = rng.bytes(1 << 20);
    const auto sealed = deserialize_sealed(serialize(seal_to_recipient(master.mpk, "big@x", m, rng)));
    EXPECT_EQ(open_as_recipient(crypto::ibe_extract(master, "big@x"), sealed), m);
}

TEST_F(EnvelopeTest, WrongRecipientIsNotMine) {
    const auto sealed = seal_to_recipient(master.mpk, "a@x", to_bytes("for a"), rng);
    EXPECT_FALSE(open_as_recipient(crypto::ibe_extract(master, "b@x"), sealed).has_value());
}

TEST_F(EnvelopeTest, CorruptedDigestIsNotMineNeverCrash) {
    const auto key = crypto::ibe_extract(master, "a@x");
    auto sealed = seal_to_recipient(master.mpk, "a@x", to_bytes("payload"), rng);
    for (std::size_t i = 0; i < sealed.enc_digest.v.size(); ++i) {
        auto bad = sealed;
        bad.enc_digest.v[i] ^= 0x40;
        EXPECT_FALSE(open_as_recipient(key, bad).has_value());
    }
    auto bad = sealed;
    bad.enc_digest.v.resize(5);
    EXPECT_FALSE(open_as_recipient(key, bad).has_value());
    bad = sealed;
    bad.enc_digest.u = master.mpk.context().generator();
    EXPECT_FALSE(open_as_recipient(key, bad).has_value());
    // Corrupting the serialized group element is a decode error, not a value.
    Bytes wire_bytes = serialize(sealed);
    wire_bytes[10] ^= 1;
    EXPECT_THROW(deserialize_sealed(wire_bytes), Error);
}

TEST(Padding, BucketsAndRoundTrip) {
    EXPECT_EQ(bucket_for(0), 1024u);
    EXPECT_EQ(bucket_for(1020), 1024u);
    EXPECT_EQ(bucket_for(1021), 4096u);
    EXPECT_EQ(bucket_for(kMaxMessageSize), 16384u);
    EXPECT_THROW(bucket_for(kMaxMessageSize + 1), Error);
    for (std::size_t n : {1u, 500u, 1020u, 1021u, 5000u, 16380u}) {
        const Bytes m(n, 0xab);
        const Bytes p = pad_message(m);
        EXPECT_EQ(p.size(), bucket_for(n));
        EXPECT_EQ(unpad_message(p), m);
    }
    Bytes p = pad_message(to_bytes("x"));
    p.back() = 1;
    EXPECT_THROW(unpad_message(p), MalformedError);
    EXPECT_THROW(unpad_message(Bytes(100)), MalformedError);
}

TEST_F(EnvelopeTest, OnionSingleHop) {
    Mixers mixers(rng, 1);
    const auto mailbox = Address::mailbox("h", 9000, mailbox_one());
    const auto sealed = seal_to_recipient(master.mpk, "a@x", to_bytes("m"), rng);
    const auto packet = onion_wrap(mixers.route, mailbox, sealed, rng);
    const auto peeled = onion_peel(mixers.keys[0], packet);
    ASSERT_TRUE(peeled);
    EXPECT_EQ(peeled->next, mailbox);
    EXPECT_EQ(deserialize_sealed(peeled->inner), sealed);
}

TEST_F(EnvelopeTest, OnionVisitsRouteInOrderForLengthsOneToFive) {
    const auto sealed = seal_to_recipient(master.mpk, "a@x", to_bytes("route test"), rng);
    const auto mailbox = Address::mailbox("mb", 9100, mailbox_one());
    for (std::size_t len = 1; len <= 5; ++len) {
        Mixers mixers(rng, len);
        Bytes packet = onion_wrap(mixers.route, mailbox, sealed, rng);
        std::vector<Address> visited;
        for (std::size_t hop = 0; hop < len; ++hop) {
            auto peeled = onion_peel(mixers.keys[hop], packet);
            ASSERT_TRUE(peeled) << "len " << len << " hop " << hop;
            visited.push_back(peeled->next);
            packet = peeled->inner;
        }
        for (std::size_t hop = 0; hop + 1 < len; ++hop) EXPECT_EQ(visited[hop], mixers.route[hop + 1].address);
        EXPECT_EQ(visited.back().kind, AddressKind::Mailbox);
        EXPECT_EQ(deserialize_sealed(packet), sealed);
    }
}

TEST_F(EnvelopeTest, OnionOutOfOrderKeysFailAtFirstWrongHop) {
    Mixers mixers(rng, 3);
    const auto sealed = seal_to_recipient(master.mpk, "a@x", to_bytes("m"), rng);
    const auto packet = onion_wrap(mixers.route, Address::mailbox("h", 1, mailbox_one()), sealed, rng);
    EXPECT_FALSE(onion_peel(mixers.keys[1], packet).has_value());
}

TEST_F(EnvelopeTest, OnionTamperIsOpenFailure) {
    Mixers mixers(rng, 2);
    const auto sealed = seal_to_recipient(master.mpk, "a@x", to_bytes("m"), rng);
    const auto packet = onion_wrap(mixers.route, Address::mailbox("h", 1, mailbox_one()), sealed, rng);
    for (std::size_t i : {1u, 40u, 60u, 100u, 400u}) {
        Bytes bad = packet;
        bad[i] ^= 0x01;
        EXPECT_FALSE(onion_peel(mixers.keys[0], bad).has_value()) << i;
    }
    EXPECT_THROW(onion_peel(mixers.keys[0], ByteView(packet).first(30)), MalformedError);
}

TEST_F(EnvelopeTest, OnionEmptyRouteAndBadMailbox) {
    const auto sealed = seal_to_recipient(master.mpk, "a@x", to_bytes("m"), rng);
    try {
        onion_wrap({}, Address::mailbox("h", 1, mailbox_one()), sealed, rng);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::RouteTooShort);
    }
    Mixers mixers(rng, 1);
    EXPECT_THROW(onion_wrap(mixers.route, Address::mixer("h", 1), sealed, rng), Error);
}

TEST_F(EnvelopeTest, EqualLengthOnionsWithinBucketAndRouteLength) {
    Mixers mixers(rng, 3);
    const auto mailbox = Address::mailbox("h", 9000, mailbox_one());
    std::set<std::size_t> sizes;
    for (std::size_t n : {1u, 17u, 300u, 1000u}) {
        const auto sealed = seal_to_recipient(master.mpk, "a@x", pad_message(rng.bytes(n)), rng);
        sizes.insert(onion_wrap(mixers.route, mailbox, sealed, rng).size());
    }
    EXPECT_EQ(sizes.size(), 1u);
}

TEST(Serialization, AddressRoundTripAndInjectivity) {
    DeterministicRng rng(9);
    std::set<Bytes> seen;
    for (int i = 0; i < 300; ++i) {
        Address a;
        a.kind = rng.uniform(2) ? AddressKind::Mailbox : AddressKind::Mixer;
        a.host = to_string(rng.bytes(rng.uniform(12)));
        a.port = std::uint16_t(1 + rng.uniform(65535));
        if (a.kind == AddressKind::Mailbox) a.mailbox_id = rng.array<32>();
        const Bytes b = serialize(a);
        EXPECT_EQ(deserialize_address(b), a);
        seen.insert(b);
    }
    EXPECT_EQ(seen.size(), 300u);
}

TEST(Serialization, AddressRejectsPortZeroAndTrailingBytes) {
    Bytes b = serialize(Address::mixer("h", 1));
    Bytes trailing = b;
    trailing.push_back(0);
    EXPECT_THROW(deserialize_address(trailing), MalformedError);
    b[b.size() - 2] = 0;
    b[b.size() - 1] = 0;
    EXPECT_THROW(deserialize_address(b), MalformedError);
}

TEST(Serialization, MalformedErrorReportsOffset) {
    const Bytes b = serialize(Address::mailbox("host", 9000, mailbox_one()));
    try {
        deserialize_address(ByteView(b).first(7));
        FAIL();
    } catch (const MalformedError& e) {
        EXPECT_EQ(e.offset(), 6u);  // version, kind, 4-byte length, then the host bytes
    }
}

// ---------------------------------------------------------------------------
// Golden vectors: fixed seeds, frozen bytes.

template <typename Decode>
void expect_truncation_always_fails(const Bytes& full, Decode decode) {
    for (std::size_t n = 0; n < full.size(); ++n) {
        EXPECT_THROW(decode(ByteView(full).first(n)), MalformedError) << "prefix " << n;
    }
}

TEST(Golden, MailboxAddress) {
    const Address a = Address::mailbox("h", 9000, mailbox_one());
    const Bytes g = test_support::golden("address_mailbox.bin", serialize(a));
    // version 01 | kind 01 | len 01000000 | 'h' | port 2823 | id 00..01
    EXPECT_EQ(to_hex(g), "010101000000682823" + std::string(62, '0') + "01");
    EXPECT_EQ(deserialize_address(g), a);
    expect_truncation_always_fails(g, [](ByteView b) { return deserialize_address(b); });
}

TEST(Golden, MixerAddress) {
    const Address a = Address::mixer("10.0.0.1", 7001);
    const Bytes g = test_support::golden("address_mixer.bin", serialize(a));
    EXPECT_EQ(g, serialize(a));
    EXPECT_EQ(deserialize_address(g), a);
}

struct GoldenFixture {
    DeterministicRng master_rng{1, "golden-master"};
    crypto::MasterKeyPair master = crypto::ibe_setup(master_rng);
    DeterministicRng rng{42, "golden"};
    SealedMessage sealed = seal_to_recipient(master.mpk, "alice@example.com", to_bytes("golden message"), rng);
};

TEST(Golden, SealedMessageAndMasterPublicKey) {
    GoldenFixture f;
    const Bytes sealed_bytes = test_support::golden("sealed_message.bin", serialize(f.sealed));
    EXPECT_EQ(sealed_bytes, serialize(f.sealed));
    const auto parsed = deserialize_sealed(sealed_bytes);
    EXPECT_EQ(serialize(parsed), sealed_bytes);
    EXPECT_EQ(open_as_recipient(crypto::ibe_extract(f.master, "alice@example.com"), parsed),
              to_bytes("golden message"));
    expect_truncation_always_fails(sealed_bytes, [](ByteView b) { return deserialize_sealed(b); });

    const Bytes mpk_bytes = test_support::golden("master_public_key.bin", serialize(f.master.mpk));
    EXPECT_EQ(mpk_bytes, serialize(f.master.mpk));
    EXPECT_EQ(deserialize_mpk(mpk_bytes), f.master.mpk);
    expect_truncation_always_fails(mpk_bytes, [](ByteView b) { return deserialize_mpk(b); });
}

TEST(Golden, OnionPacket) {
    GoldenFixture f;
    DeterministicRng key_rng(3, "golden-mixers");
    Mixers mixers(key_rng, 2);
    const auto packet = onion_wrap(mixers.route, Address::mailbox("h", 9000, mailbox_one()), f.sealed, f.rng);
    const Bytes g = test_support::golden("onion_packet.bin", packet);
    EXPECT_EQ(g, packet);
    auto first = onion_peel(mixers.keys[0], g);
    ASSERT_TRUE(first);
    EXPECT_EQ(first->next, mixers.route[1].address);
    auto second = onion_peel(mixers.keys[1], first->inner);
    ASSERT_TRUE(second);
    EXPECT_EQ(deserialize_sealed(second->inner), f.sealed);
}

TEST(Golden, MasterSecretNeverInPublicParameters) {
    GoldenFixture f;
    const Bytes mpk_bytes = serialize(f.master.mpk);
    const Bytes msk_bytes = f.master.mpk.context().encode_scalar(f.master.msk);
    EXPECT_EQ(std::search(mpk_bytes.begin(), mpk_bytes.end(), msk_bytes.begin(), msk_bytes.end()), mpk_bytes.end());
}

}  // namespace
