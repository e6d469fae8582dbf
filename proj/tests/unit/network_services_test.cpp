#include <gtest/gtest.h>

#include "support/world.hpp"
#include "zephyr/client.hpp"
#include "zephyr/mailbox.hpp"
#include "zephyr/wire.hpp"

namespace zephyr {
namespace {

using test_support::call;
using test_support::quiet_config;
using test_support::run_to_open;

Result<info::KeyBundle> bundle_from(sim::World& w, const std::string& info, std::uint64_t round) {
    std::optional<Result<info::KeyBundle>> out;
    w.node(info).info->fetch_bundle(round, [&](Result<info::KeyBundle> r) { out = std::move(r); });
    w.run_until([&] { return out.has_value(); }, w.now() + net::seconds(5));
    return out ? *out : Result<info::KeyBundle>::failure(Errc::Timeout, "no answer");
}

/// Runs until both info nodes serve a complete bundle for `round`.
bool bundle_ready(sim::World& w, std::uint64_t round) {
    const auto deadline = w.now() + net::seconds(5);
    while (w.now() < deadline) {
        if (bundle_from(w, "info0", round).ok() && bundle_from(w, "info1", round).ok()) return true;
        w.run_for(net::ms(50));
    }
    return false;
}

// ---------------------------------------------------------------------------
// Info nodes

TEST(InfoNodeNet, BothNodesServeByteIdenticalBundles) {
    sim::World w(quiet_config(31));
    w.start();
    ASSERT_TRUE(run_to_open(w, 1));
    ASSERT_TRUE(bundle_ready(w, 1));
    auto& c = w.node("client0");
    const auto a = call(w, c, w.node("info0").endpoint, net::Opcode::FetchBundle, info::encode_fetch_request(1, 0));
    const auto b = call(w, c, w.node("info1").endpoint, net::Opcode::FetchBundle, info::encode_fetch_request(1, 0));
    ASSERT_TRUE(a.ok() && b.ok());
    EXPECT_EQ(a.payload, b.payload);
    const auto bundle = info::deserialize_bundle(ByteView(a.payload).subspan(1));
    EXPECT_EQ(bundle.records.size(), 3u);
    EXPECT_TRUE(std::is_sorted(bundle.records.begin(), bundle.records.end(),
                               [](const auto& x, const auto& y) { return x.mixer_id < y.mixer_id; }));
    EXPECT_EQ(bundle.state.mpk_digest, digest_mpk(bundle.mpk));
    Authority auth(w.coordinator().key->public_key());
    EXPECT_TRUE(client::verify_bundle(auth, bundle).ok());
}

TEST(InfoNodeNet, NewerThanWatermarkAndUnknownRound) {
    sim::World w(quiet_config(32));
    w.start();
    ASSERT_TRUE(run_to_open(w, 1));
    ASSERT_TRUE(bundle_ready(w, 1));
    auto& c = w.node("client0");
    const auto same = call(w, c, w.node("info0").endpoint, net::Opcode::FetchBundle,
                           info::encode_fetch_request(info::kLatestRound, 1));
    ASSERT_TRUE(same.ok());
    EXPECT_EQ(same.payload, Bytes{1});
    const auto unknown = call(w, c, w.node("info0").endpoint, net::Opcode::FetchBundle,
                              info::encode_fetch_request(99, 0));
    ASSERT_FALSE(unknown.ok());
    EXPECT_EQ(*unknown.error, Errc::UnknownRound);
}

TEST(InfoNodeNet, MissingMixerRecordMakesBundleIncomplete) {
    sim::World w(quiet_config(33));
    w.start();
    ASSERT_TRUE(run_to_open(w, 1));
    ASSERT_TRUE(bundle_ready(w, 1));
    auto& coord = w.coordinator();
    auto state = *w.node("info0").authority->current();
    state.round = 50;
    state.sign(*coord.key);
    const Bytes mpk = bundle_from(w, "info0", 1).value->mpk;
    ASSERT_TRUE(w.node("info0").info->on_open({state, mpk}));
    const auto r = bundle_from(w, "info0", 50);
    ASSERT_FALSE(r.ok());
    EXPECT_EQ(r.error, Errc::IncompleteBundle);
    EXPECT_NE(r.message.find("missing mixers"), std::string::npos);

    // Publishing every record completes it; a later publication replaces an earlier one.
    for (const auto& m : state.directory.mixers) {
        info::MixerKeyRecord rec;
        rec.mixer_id = m.id;
        rec.round = 50;
        rec.address = mixer_address(m.endpoint);
        rec.published_at = 1;
        w.node("info0").info->publish_key(rec);
        rec.public_key.fill(0x5a);
        rec.published_at = 2;
        w.node("info0").info->publish_key(rec);
    }
    const auto ok = bundle_from(w, "info0", 50);
    ASSERT_TRUE(ok.ok());
    for (const auto& rec : ok.value->records) EXPECT_EQ(rec.published_at, 2u);
}

TEST(InfoNodeNet, RecordsReplicateThroughTheDht) {
    sim::World w(quiet_config(34));
    w.start();
    ASSERT_TRUE(run_to_open(w, 1));
    ASSERT_TRUE(bundle_ready(w, 1));
    // info1 forgets everything and still assembles round 1 from DHT replicas.
    auto& n = w.node("info1");
    const auto state = *n.authority->current();
    const Bytes mpk = bundle_from(w, "info0", 1).value->mpk;
    n.info->reset();
    n.info = std::make_unique<info::InfoNode>(*n.rpc, *n.dht, *n.authority);
    ASSERT_TRUE(n.info->on_open({state, mpk}));
    const auto r = bundle_from(w, "info1", 1);
    ASSERT_TRUE(r.ok()) << r.message;
    EXPECT_EQ(*r.value, *bundle_from(w, "info0", 1).value);
}

// ---------------------------------------------------------------------------
// Coordinator

TEST(CoordinatorNet, EveryRoundStateIsSignedAndBoundToThePkgParameters) {
    sim::World w(quiet_config(35));
    w.start();
    for (std::uint64_t r = 1; r <= 3; ++r) {
        ASSERT_TRUE(run_to_open(w, r));
        ASSERT_TRUE(bundle_ready(w, r));
        const auto b = bundle_from(w, "info0", r);
        EXPECT_TRUE(b.value->state.signature_valid());
        EXPECT_EQ(b.value->state.signer, w.coordinator().key->public_key());
        EXPECT_EQ(b.value->state.round, r);
        EXPECT_EQ(b.value->mpk, w.node("pkg").pkg_core->serve_params());
    }
    EXPECT_TRUE(sim::check_single_actor(w.trace()).empty());
}

TEST(CoordinatorNet, CrashedMixerIsLeftOutOfTheNextDirectory) {
    sim::World w(quiet_config(36));
    w.start();
    ASSERT_TRUE(run_to_open(w, 1));
    ASSERT_TRUE(bundle_ready(w, 1));
    EXPECT_EQ(w.node("info0").authority->current()->directory.mixers.size(), 3u);
    w.crash("mixer2");
    ASSERT_TRUE(run_to_open(w, 2));
    ASSERT_TRUE(bundle_ready(w, 2));
    const auto dir = bundle_from(w, "info0", 2).value->state.directory;
    EXPECT_EQ(dir.mixers.size(), 2u);
    EXPECT_EQ(dir.find_mixer(w.node("mixer2").id()), nullptr);
    const auto& lag = w.coordinator().coordinator->core()->laggards();
    EXPECT_NE(std::find(lag.begin(), lag.end(), w.node("mixer2").endpoint), lag.end());
}

TEST(CoordinatorNet, ForgedRoundStateIsIgnored) {
    sim::World w(quiet_config(37));
    w.start();
    ASSERT_TRUE(run_to_open(w, 1));
    ASSERT_TRUE(bundle_ready(w, 1));
    auto state = *w.node("mixer0").authority->current();
    state.round = 2;
    const auto forged = crypto::SigningKey::generate(w.node("client0").rt->rng());
    state.sign(forged);
    info::OpenRound open{state, {}};
    for (const char* target : {"mixer0", "info0", "mailbox0", "pkg"}) {
        const auto r = call(w, w.node("client0"), w.node(target).endpoint, net::Opcode::OpenRound,
                            info::serialize(open));
        EXPECT_FALSE(r.ok()) << target;
        EXPECT_EQ(w.node(target).authority->round(), 1u) << target;
    }
}

// ---------------------------------------------------------------------------
// Mailbox server

TEST(MailboxNet, AppendsAreAcceptedOnlyFromDirectoryMixers) {
    sim::World w(quiet_config(38));
    w.start();
    ASSERT_TRUE(run_to_open(w, 1));
    mailbox::MailboxId id{};
    id.fill(7);
    const Bytes batch = mailbox::encode_append(1, {{id, to_bytes("x")}});
    const auto outsider = call(w, w.node("client0"), w.node("mailbox0").endpoint, net::Opcode::Append, batch);
    EXPECT_FALSE(outsider.ok());
    const auto insider = call(w, w.node("mixer1"), w.node("mailbox0").endpoint, net::Opcode::Append, batch);
    ASSERT_TRUE(insider.ok());
    const auto fetched = call(w, w.node("client0"), w.node("mailbox0").endpoint, net::Opcode::FetchAll,
                              mailbox::encode_fetch(id, 1));
    ASSERT_TRUE(fetched.ok());
    const auto recs = mailbox::decode_fetch_response(id, 1, fetched.payload);
    ASSERT_EQ(recs.size(), 1u);
    EXPECT_EQ(recs[0].blob, to_bytes("x"));
}

// ---------------------------------------------------------------------------
// Client

TEST(ClientNet, OversizedOrMisaddressedSendsTouchNoNetwork) {
    sim::World w(quiet_config(39));
    w.start();
    auto& c = w.node("client0");
    ASSERT_TRUE(w.run_until([&] { return c.client->session() != nullptr; }, w.now() + net::seconds(60)));
    w.run_for(net::ms(10));
    const auto before = c.rt->stats().frames_sent;
    std::optional<Result<client::SendReceipt>> a, b;
    c.client->send("peer@zephyr.test", Bytes(1 << 20, 'x'), [&](auto r) { a = std::move(r); });
    c.client->send("not an address", to_bytes("hi"), [&](auto r) { b = std::move(r); });
    ASSERT_TRUE(a && b);
    EXPECT_EQ(a->error, Errc::PayloadTooLong);
    EXPECT_EQ(b->error, Errc::InvalidEmail);
    EXPECT_EQ(c.rt->stats().frames_sent, before);
}

TEST(ClientNet, SendThenFetchDeliversToTheRecipientOnly) {
    auto cfg = quiet_config(40);
    cfg.clients = 3;
    sim::World w(cfg);
    w.start();
    auto& alice = w.node("client0");
    auto& bob = w.node("client1");
    auto& carol = w.node("client2");
    ASSERT_TRUE(w.run_until(
        [&] { return alice.client->session() && bob.client->session() && carol.client->session(); },
        w.now() + net::seconds(60)));
    alice.client->stop();
    bob.client->stop();
    carol.client->stop();
    const auto round = alice.client->session()->round;
    std::optional<Result<client::SendReceipt>> sent;
    alice.client->send(bob.client->identity(), to_bytes("for bob"), [&](auto r) { sent = std::move(r); });
    ASSERT_TRUE(w.run_until([&] { return sent.has_value(); }, w.now() + net::seconds(5)));
    ASSERT_TRUE(sent->ok()) << sent->message;
    EXPECT_GE(sent->value->route_length, 2u);
    ASSERT_TRUE(run_to_open(w, round + 1));
    w.run_for(net::seconds(1));

    auto fetch = [&](sim::SimNode& n) {
        std::optional<Result<std::vector<client::Delivered>>> out;
        n.client->fetch_round(*n.client->session(), [&](auto r) { out = std::move(r); });
        w.run_until([&] { return out.has_value(); }, w.now() + net::seconds(5));
        return out ? *out : Result<std::vector<client::Delivered>>::failure(Errc::Timeout, "no answer");
    };
    const auto got = fetch(bob);
    ASSERT_TRUE(got.ok());
    ASSERT_EQ(got.value->size(), 1u);
    EXPECT_EQ((*got.value)[0].plaintext, to_bytes("for bob"));
    const auto other = fetch(carol);
    ASSERT_TRUE(other.ok());
    EXPECT_TRUE(other.value->empty());
}

}  // namespace
}  // namespace zephyr
