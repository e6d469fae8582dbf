#include <gtest/gtest.h>

#include "support/golden.hpp"
#include "zephyr/coordinator.hpp"
#include "zephyr/crypto/rng.hpp"
#include "zephyr/info_node.hpp"
#include "zephyr/mailbox.hpp"
#include "zephyr/net/frame.hpp"
#include "zephyr/round_state.hpp"

namespace zephyr {
namespace {

template <typename F>
void expect_every_prefix_rejected(const Bytes& full, F decode) {
    for (std::size_t n = 0; n < full.size(); ++n)
        EXPECT_THROW(decode(ByteView(full).first(n)), MalformedError) << "prefix " << n;
}

crypto::SigningKey key_from(std::uint8_t b) {
    ByteArray<32> seed{};
    seed.fill(b);
    return crypto::SigningKey::from_seed(seed);
}

NodeId id_of(const crypto::SigningKey& k) { return NodeId::from_public_key(k.public_key()); }

RoundState fixed_state() {
    const auto coord = key_from(1);
    RoundState s;
    s.round = 7;
    for (std::uint8_t i = 0; i < 3; ++i) {
        const auto k = key_from(static_cast<std::uint8_t>(10 + i));
        s.directory.mixers.push_back({id_of(k), "mixer" + std::to_string(i) + ".example:7000", k.public_key()});
    }
    std::sort(s.directory.mixers.begin(), s.directory.mixers.end(),
              [](const MixerEntry& a, const MixerEntry& b) { return a.id < b.id; });
    s.directory.info_nodes = {"info0.example:7000", "info1.example:7000"};
    s.directory.mailbox_servers = {"mailbox0.example:7000"};
    s.directory.mailbox_count = 16;
    s.directory.pkg_endpoint = "pkg.example:7000";
    s.directory.salt.fill(0x33);
    s.directory.round_duration = 10'000'000;
    s.phase = RoundPhase::Open;
    s.coordinator = id_of(coord);
    s.coordinator_endpoint = "coordinator.example:7000";
    s.last_mixer = s.directory.mixers.back().id;
    s.mpk_digest.fill(0x44);
    s.sign(coord);
    return s;
}

info::KeyBundle fixed_bundle() {
    info::KeyBundle b;
    b.round = 7;
    b.state = fixed_state();
    b.mpk = Bytes(96, 0x5c);
    for (std::size_t i = 0; i < b.state.directory.mixers.size(); ++i) {
        const auto& m = b.state.directory.mixers[i];
        info::MixerKeyRecord r;
        r.mixer_id = m.id;
        r.round = 7;
        r.public_key.fill(static_cast<std::uint8_t>(0x60 + i));
        r.address = mixer_address(m.endpoint);
        r.published_at = 1000 + i;
        b.records.push_back(r);
    }
    return b;
}

net::Frame fixed_frame() {
    net::Frame f;
    f.opcode = net::Opcode::FetchBundle;
    f.kind = net::FrameKind::Request;
    f.request_id = 0x0102030405060708ULL;
    f.sender = id_of(key_from(2));
    f.reply_to = "client.example:7000";
    f.payload = info::encode_fetch_request(7, 6);
    return f;
}

TEST(WireGolden, RoundState) {
    const auto s = fixed_state();
    const Bytes g = test_support::golden("round_state.bin", serialize(s));
    EXPECT_EQ(g, serialize(s));
    const auto back = deserialize_round_state(g);
    EXPECT_EQ(back, s);
    EXPECT_TRUE(back.signature_valid());
    EXPECT_EQ(serialize(back), g);
    expect_every_prefix_rejected(g, [](ByteView b) { return deserialize_round_state(b); });
}

TEST(WireGolden, KeyBundle) {
    const auto b = fixed_bundle();
    const Bytes g = test_support::golden("key_bundle.bin", info::serialize(b));
    EXPECT_EQ(g, info::serialize(b));
    EXPECT_EQ(info::deserialize_bundle(g), b);
    expect_every_prefix_rejected(g, [](ByteView v) { return info::deserialize_bundle(v); });
}

TEST(WireGolden, OpenRound) {
    const info::OpenRound o{fixed_state(), Bytes(96, 0x5c)};
    const Bytes g = test_support::golden("open_round.bin", info::serialize(o));
    EXPECT_EQ(g, info::serialize(o));
    const auto back = info::deserialize_open(g);
    EXPECT_EQ(back.state, o.state);
    EXPECT_EQ(back.mpk, o.mpk);
    expect_every_prefix_rejected(g, [](ByteView v) { return info::deserialize_open(v); });
}

TEST(WireGolden, SignedCommandAndReport) {
    const auto k = key_from(1);
    const auto cmd = SignedCommand::make("close", 7, id_of(k), k);
    const Bytes g = test_support::golden("signed_command.bin", serialize(cmd));
    EXPECT_EQ(g, serialize(cmd));
    EXPECT_TRUE(deserialize_command(g).signature_valid());
    expect_every_prefix_rejected(g, [](ByteView v) { return deserialize_command(v); });

    const coordinator::RoundReport rep{7, false, 12, 12, 1, 6, 5, 2, 1};
    const Bytes r = test_support::golden("round_report.bin", coordinator::serialize(rep));
    EXPECT_EQ(r, coordinator::serialize(rep));
    EXPECT_EQ(coordinator::deserialize_report(r), rep);
    expect_every_prefix_rejected(r, [](ByteView v) { return coordinator::deserialize_report(v); });
}

TEST(WireGolden, RequestFrame) {
    const auto f = fixed_frame();
    const Bytes g = test_support::golden("frame_fetch_bundle.bin", net::encode_frame(f));
    EXPECT_EQ(g, net::encode_frame(f));
    // version 01 | opcode 21 | kind 00 | request id, little endian
    EXPECT_EQ(to_hex(ByteView(g).first(11)), "0121000807060504030201");
    const auto back = net::decode_frame(g);
    EXPECT_EQ(back.opcode, f.opcode);
    EXPECT_EQ(back.request_id, f.request_id);
    EXPECT_EQ(back.sender, f.sender);
    EXPECT_EQ(back.reply_to, f.reply_to);
    EXPECT_EQ(back.payload, f.payload);
    expect_every_prefix_rejected(g, [](ByteView v) { return net::decode_frame(v); });
}

TEST(WireGolden, MailboxFetchResponseTruncation) {
    mailbox::MailboxId id{};
    id.fill(9);
    // u32 n | n x (u64 seq, bytes blob)
    wire::Writer w;
    w.u32(2).u64(1).bytes(to_bytes("first")).u64(2).bytes(to_bytes("second"));
    const Bytes full = std::move(w).take();
    const auto recs = mailbox::decode_fetch_response(id, 3, full);
    ASSERT_EQ(recs.size(), 2u);
    EXPECT_EQ(recs[1].blob, to_bytes("second"));
    expect_every_prefix_rejected(full, [&](ByteView v) { return mailbox::decode_fetch_response(id, 3, v); });
}

TEST(FrameStream, EveryPrefixYieldsNothingAndTheWholeYieldsTheFrame) {
    const Bytes frame = net::encode_frame(fixed_frame());
    const Bytes stream = net::length_prefixed(frame);
    for (std::size_t n = 0; n < stream.size(); ++n) {
        net::FrameAssembler a;
        a.feed(ByteView(stream).first(n));
        EXPECT_FALSE(a.next().has_value()) << "prefix " << n;
        EXPECT_EQ(a.buffered(), n);
    }
    net::FrameAssembler a;
    a.feed(stream);
    EXPECT_EQ(a.next(), frame);
    EXPECT_FALSE(a.next().has_value());
}

TEST(FrameStream, RandomChunkingReassemblesExactly) {
    crypto::DeterministicRng rng(12, "chunks");
    std::vector<Bytes> frames;
    Bytes stream;
    for (int i = 0; i < 40; ++i) {
        frames.push_back(rng.bytes(rng.uniform(300)));
        append(stream, net::length_prefixed(frames.back()));
    }
    for (int trial = 0; trial < 20; ++trial) {
        net::FrameAssembler a;
        std::vector<Bytes> got;
        std::size_t pos = 0;
        while (pos < stream.size()) {
            const std::size_t n = std::min<std::size_t>(stream.size() - pos, 1 + rng.uniform(64));
            a.feed(ByteView(stream).subspan(pos, n));
            pos += n;
            while (auto f = a.next()) got.push_back(std::move(*f));
        }
        EXPECT_EQ(got, frames);
        EXPECT_EQ(a.buffered(), 0u);
    }
}

TEST(FrameStream, OversizedLengthIsRejected) {
    net::FrameAssembler a;
    a.feed(Bytes{0xff, 0xff, 0xff, 0xff});
    EXPECT_THROW(a.next(), MalformedError);
}

}  // namespace
}  // namespace zephyr
