#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <thread>

#include "zephyr/client.hpp"
#include "zephyr/coordinator.hpp"
#include "zephyr/crypto/rng.hpp"
#include "zephyr/mailbox.hpp"
#include "zephyr/pkg.hpp"
#include "zephyr/round_state.hpp"
#include "zephyr/sim/stats.hpp"

namespace zephyr {
namespace {

// ---------------------------------------------------------------------------
// Statistics helpers

TEST(Stats, ChiSquareMatchesTableValues) {
    const auto c = sim::chi_square_uniform({1000, 1000});
    EXPECT_DOUBLE_EQ(c.statistic, 0.0);
    EXPECT_NEAR(c.p_value, 1.0, 1e-12);

    // Offsets +23, -23, +7, -7, 0, 0 around 100: statistic 1156 / 100, df 5.
    const auto d = sim::chi_square_uniform({123, 77, 107, 93, 100, 100});
    EXPECT_NEAR(d.statistic, 11.56, 1e-9);
    // Upper tail of chi2(5) at 11.56, from the closed form for odd df.
    const double x = 11.56;
    const double tail = std::erfc(std::sqrt(x / 2)) +
                        std::sqrt(2 * x / M_PI) * std::exp(-x / 2) * (1 + x / 3);
    EXPECT_NEAR(d.p_value, tail, 1e-9);
    EXPECT_LT(d.p_value, 0.05);
    EXPECT_GT(d.p_value, 0.01);
}

TEST(Stats, ChiSquareEvenDegreesClosedForm) {
    // df = 2: p = exp(-x/2).
    const auto c = sim::chi_square_uniform({130, 70, 100});
    EXPECT_NEAR(c.statistic, 18.0, 1e-9);
    EXPECT_NEAR(c.p_value, std::exp(-9.0), 1e-12);
}

TEST(Stats, LinearFitRecoversExactLine) {
    const std::vector<double> x = {20, 40, 60, 80, 100};
    std::vector<double> y;
    for (double v : x) y.push_back(3.5 * v + 12);
    const auto f = sim::linear_fit(x, y);
    EXPECT_NEAR(f.slope, 3.5, 1e-9);
    EXPECT_NEAR(f.intercept, 12, 1e-9);
    EXPECT_NEAR(f.r2, 1.0, 1e-12);
}

TEST(Stats, LinearFitHandComputedNoisyCase) {
    // x = 1..4, y = 2, 3, 5, 4: slope 0.8, intercept 1.5, r2 = 0.64.
    const auto f = sim::linear_fit({1, 2, 3, 4}, {2, 3, 5, 4});
    EXPECT_NEAR(f.slope, 0.8, 1e-12);
    EXPECT_NEAR(f.intercept, 1.5, 1e-12);
    EXPECT_NEAR(f.r2, 0.64, 1e-12);
}

// ---------------------------------------------------------------------------
// PKG core

struct PkgRig {
    crypto::DeterministicRng rng{7, "pkg"};
    pkg::InMemoryEmail mail;
    pkg::PkgConfig config = [] {
        pkg::PkgConfig c;
        c.preset = crypto::CurvePreset::TypeATiny;
        return c;
    }();
    pkg::PkgCore core{config, rng, mail};
    PkgRig() { core.rotate_master(1); }

    std::string code_for(const std::string& who) { return *mail.last_code(who); }
    static std::string wrong(const std::string& code) { return code == "000000" ? "000001" : "000000"; }
};

void expect_rejected(const std::function<void()>& f) {
    try {
        f();
        FAIL() << "expected rejection";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::Rejected);
    }
}

TEST(Pkg, CodeTravelsOnlyThroughTheTransport) {
    PkgRig rig;
    rig.core.begin_auth("Alice@Example.org", 0);
    ASSERT_EQ(rig.mail.messages().size(), 1u);
    EXPECT_EQ(rig.mail.messages()[0].address, "alice@example.org");
    const auto code = rig.code_for("alice@example.org");
    EXPECT_EQ(code.size(), 6u);
    EXPECT_TRUE(std::all_of(code.begin(), code.end(), ::isdigit));
    const auto e = rig.core.complete_auth("alice@example.org", code, 1000);
    EXPECT_EQ(e.round, 1u);
    EXPECT_TRUE(crypto::ibe_verify_key(rig.core.mpk(), e.key));
    EXPECT_EQ(e.mpk, rig.core.serve_params());
    // The challenge is consumed.
    expect_rejected([&] { rig.core.complete_auth("alice@example.org", code, 2000); });
}

TEST(Pkg, FiveWrongAttemptsKillTheChallenge) {
    PkgRig rig;
    rig.core.begin_auth("bob@example.org", 0);
    const auto code = rig.code_for("bob@example.org");
    for (int i = 0; i < 5; ++i) expect_rejected([&] { rig.core.complete_auth("bob@example.org", PkgRig::wrong(code), i); });
    expect_rejected([&] { rig.core.complete_auth("bob@example.org", code, 10); });
}

TEST(Pkg, FourWrongAttemptsStillAllowTheRightCode) {
    PkgRig rig;
    rig.core.begin_auth("bob@example.org", 0);
    const auto code = rig.code_for("bob@example.org");
    for (int i = 0; i < 4; ++i) expect_rejected([&] { rig.core.complete_auth("bob@example.org", PkgRig::wrong(code), i); });
    EXPECT_NO_THROW(rig.core.complete_auth("bob@example.org", code, 10));
}

TEST(Pkg, ExpiredCodeIsRejected) {
    PkgRig rig;
    rig.core.begin_auth("carol@example.org", 0);
    const auto code = rig.code_for("carol@example.org");
    expect_rejected([&] { rig.core.complete_auth("carol@example.org", code, rig.config.code_ttl + 1); });
}

TEST(Pkg, CodeAtExactlyTheTtlIsAccepted) {
    PkgRig rig;
    rig.core.begin_auth("carol@example.org", 0);
    EXPECT_NO_THROW(rig.core.complete_auth("carol@example.org", rig.code_for("carol@example.org"), rig.config.code_ttl));
}

TEST(Pkg, InvalidEmailIsRefusedBeforeAnyMail) {
    PkgRig rig;
    for (const char* bad : {"", "nobody", "a@", "@b.org", "a b@c.org", "a@@b.org"}) {
        try {
            rig.core.begin_auth(bad, 0);
            ADD_FAILURE() << bad;
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), Errc::InvalidEmail) << bad;
        }
    }
    EXPECT_TRUE(rig.mail.messages().empty());
}

TEST(Pkg, ChallengesAreRateLimitedPerRound) {
    PkgRig rig;
    for (int i = 0; i < 3; ++i) rig.core.begin_auth("dave@example.org", i);
    try {
        rig.core.begin_auth("DAVE@example.org", 4);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::RateLimited);
    }
    rig.core.rotate_master(2);
    EXPECT_NO_THROW(rig.core.begin_auth("dave@example.org", 5));
}

TEST(Pkg, RotationInvalidatesOutstandingChallenges) {
    PkgRig rig;
    rig.core.begin_auth("erin@example.org", 0);
    const auto code = rig.code_for("erin@example.org");
    const Bytes before = rig.core.serve_params();
    rig.core.rotate_master(2);
    EXPECT_NE(rig.core.serve_params(), before);
    expect_rejected([&] { rig.core.complete_auth("erin@example.org", code, 1); });
}

TEST(Pkg, RotationIsIdempotentAndNeverMovesBackwards) {
    PkgRig rig;
    rig.core.rotate_master(3);
    const Bytes p = rig.core.serve_params();
    rig.core.rotate_master(3);
    EXPECT_EQ(rig.core.serve_params(), p);
    try {
        rig.core.rotate_master(2);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::StaleRound);
    }
}

TEST(Pkg, MasterSecretNeverAppearsInOutputs) {
    PkgRig rig;
    rig.config.preset = crypto::CurvePreset::TypeA1536;
    pkg::PkgCore prod(rig.config, rig.rng, rig.mail);
    prod.rotate_master(1);
    const Bytes secret = prod.master_secret_bytes();
    ASSERT_GE(secret.size(), 8u);
    Bytes outputs = prod.serve_params();
    for (int i = 0; i < 5; ++i) {
        const std::string who = "user" + std::to_string(i) + "@example.org";
        prod.begin_auth(who, 0);
        const auto e = prod.complete_auth(who, rig.code_for(who), 1);
        append(outputs, envelope::serialize(e.key));
        append(outputs, e.mpk);
    }
    for (const auto& m : rig.mail.messages()) append(outputs, to_bytes(m.body));
    EXPECT_EQ(std::search(outputs.begin(), outputs.end(), secret.begin(), secret.end()), outputs.end());
}

TEST(Pkg, SameSeedGivesSameParameters) {
    PkgRig a, b;
    EXPECT_EQ(a.core.serve_params(), b.core.serve_params());
}

TEST(Pkg, FileOutboxKeepsTheLatestCode) {
    const auto dir = std::filesystem::temp_directory_path() / "zephyr-outbox-test";
    std::filesystem::remove_all(dir);
    pkg::FileOutbox box(dir);
    EXPECT_FALSE(pkg::FileOutbox::last_code(dir, "f@example.org").has_value());
    crypto::DeterministicRng rng(3, "outbox");
    pkg::PkgConfig cfg;
    cfg.preset = crypto::CurvePreset::TypeATiny;
    pkg::PkgCore core(cfg, rng, box);
    core.rotate_master(1);
    core.begin_auth("f@example.org", 0);
    const auto first = pkg::FileOutbox::last_code(dir, "f@example.org");
    core.begin_auth("f@example.org", 0);
    const auto second = pkg::FileOutbox::last_code(dir, "f@example.org");
    ASSERT_TRUE(first && second);
    EXPECT_NO_THROW(core.complete_auth("f@example.org", *second, 1));
    std::filesystem::remove_all(dir);
}

TEST(Pkg, CodeFromBody) {
    EXPECT_EQ(pkg::code_from_body("zephyr authentication code: 012345"), "012345");
    EXPECT_FALSE(pkg::code_from_body("no digits here").has_value());
}

// ---------------------------------------------------------------------------
// Mailbox stores

mailbox::MailboxId box(std::uint8_t b) {
    mailbox::MailboxId id{};
    id.fill(b);
    return id;
}

template <typename Store>
void exercise_contract(Store& s) {
    s.set_round(1);
    EXPECT_EQ(s.append(box(1), 1, to_bytes("a")), 1u);
    EXPECT_EQ(s.append(box(1), 1, to_bytes("b")), 2u);
    EXPECT_EQ(s.append(box(2), 1, to_bytes("c")), 1u);
    try {
        s.append(box(1), 2, to_bytes("x"));
        ADD_FAILURE();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::WrongRound);
    }
    const auto got = s.fetch_all(box(1), 1);
    ASSERT_EQ(got.size(), 2u);
    EXPECT_EQ(got[0].blob, to_bytes("a"));
    EXPECT_EQ(got[1].seq, 2u);
    s.set_round(2);
    EXPECT_EQ(s.append(box(1), 2, to_bytes("d")), 3u);  // monotone across rounds
    EXPECT_EQ(s.fetch_all(box(1), 1).size(), 2u);       // previous round readable
    EXPECT_EQ(s.purge(1), 0u);                          // not yet expired
    s.set_round(3);
    EXPECT_THROW(s.fetch_all(box(1), 1), Error);
    EXPECT_EQ(s.purge(1), 3u);
    EXPECT_EQ(s.record_count(), 1u);
    EXPECT_THROW(s.append(box(1), 3, Bytes(mailbox::max_blob_size() + 1, 0)), Error);
    EXPECT_NO_THROW(s.append(box(1), 3, Bytes(mailbox::max_blob_size(), 0)));
}

TEST(MailboxStore, MemoryContract) {
    mailbox::MemoryStore s;
    exercise_contract(s);
}

TEST(MailboxStore, LogContractAndReplay) {
    const auto path = std::filesystem::temp_directory_path() / "zephyr-mailbox-contract.journal";
    std::filesystem::remove(path);
    std::vector<mailbox::MailboxRecord> before;
    {
        mailbox::LogStore s(path);
        exercise_contract(s);
        before = s.fetch_all(box(1), 3);
    }
    mailbox::LogStore again(path);
    EXPECT_EQ(again.current_round(), 3u);
    EXPECT_EQ(again.record_count(), 2u);
    EXPECT_EQ(again.fetch_all(box(1), 3), before);
    EXPECT_EQ(again.append(box(1), 3, to_bytes("e")), 5u);
    std::filesystem::remove(path);
}

TEST(MailboxStore, TornJournalTailIsDiscarded) {
    const auto path = std::filesystem::temp_directory_path() / "zephyr-mailbox-torn.journal";
    std::filesystem::remove(path);
    {
        mailbox::LogStore s(path);
        s.set_round(1);
        s.append(box(1), 1, to_bytes("kept"));
        s.append(box(1), 1, to_bytes("torn"));
    }
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 3);
    mailbox::LogStore s(path);
    const auto recs = s.fetch_all(box(1), 1);
    ASSERT_EQ(recs.size(), 1u);
    EXPECT_EQ(recs[0].blob, to_bytes("kept"));
    EXPECT_EQ(s.append(box(1), 1, to_bytes("next")), 2u);
    std::filesystem::remove(path);
}

TEST(MailboxStore, ConcurrentAppendsGetDistinctGaplessSeqs) {
    mailbox::MemoryStore s;
    s.set_round(1);
    std::vector<std::thread> threads;
    std::vector<std::vector<std::uint64_t>> seqs(4);
    for (int t = 0; t < 4; ++t)
        threads.emplace_back([&, t] {
            for (int i = 0; i < 25; ++i) seqs[t].push_back(s.append(box(9), 1, to_bytes("m")));
        });
    for (auto& t : threads) t.join();
    std::set<std::uint64_t> all;
    for (const auto& v : seqs) all.insert(v.begin(), v.end());
    ASSERT_EQ(all.size(), 100u);
    EXPECT_EQ(*all.begin(), 1u);
    EXPECT_EQ(*all.rbegin(), 100u);
    const auto recs = s.fetch_all(box(9), 1);
    for (std::size_t i = 0; i < recs.size(); ++i) EXPECT_EQ(recs[i].seq, i + 1);
}

TEST(MailboxStore, MemoryAndLogAgreeOnRandomOperations) {
    const auto path = std::filesystem::temp_directory_path() / "zephyr-mailbox-diff.journal";
    std::filesystem::remove(path);
    mailbox::MemoryStore mem;
    mailbox::LogStore log(path);
    crypto::DeterministicRng rng(21, "mailbox-diff");
    std::uint64_t round = 1;
    mem.set_round(round);
    log.set_round(round);
    for (int step = 0; step < 400; ++step) {
        const auto op = rng.uniform(10);
        if (op < 7) {
            const auto id = box(static_cast<std::uint8_t>(rng.uniform(4)));
            const auto r = rng.uniform(5) == 0 ? round + 1 : round;
            const Bytes blob = rng.bytes(rng.uniform(40));
            std::optional<std::uint64_t> a, b;
            try { a = mem.append(id, r, blob); } catch (const Error&) {}
            try { b = log.append(id, r, blob); } catch (const Error&) {}
            ASSERT_EQ(a, b);
        } else if (op < 9) {
            ++round;
            mem.set_round(round);
            log.set_round(round);
        } else {
            const auto r = rng.uniform(round + 1);
            ASSERT_EQ(mem.purge(r), log.purge(r));
        }
        ASSERT_EQ(mem.record_count(), log.record_count());
    }
    mailbox::LogStore replayed(path);
    for (std::uint8_t b = 0; b < 4; ++b)
        for (std::uint64_t r : {round - 1, round}) EXPECT_EQ(mem.fetch_all(box(b), r), replayed.fetch_all(box(b), r));
    std::filesystem::remove(path);
}

// ---------------------------------------------------------------------------
// Round state, commands, reports

RoundState sample_state(const crypto::SigningKey& key, std::uint64_t round) {
    RoundState s;
    s.round = round;
    s.directory.mixers.push_back({NodeId::from_public_key(key.public_key()), "m0:1", key.public_key()});
    s.directory.info_nodes = {"i0:1"};
    s.directory.mailbox_servers = {"b0:1"};
    s.directory.pkg_endpoint = "p:1";
    s.coordinator = NodeId::from_public_key(key.public_key());
    s.coordinator_endpoint = "c:1";
    s.sign(key);
    return s;
}

TEST(RoundStateTest, SignedStateRoundTripsAndTamperIsDetected) {
    crypto::DeterministicRng rng(4, "state");
    const auto key = crypto::SigningKey::generate(rng);
    const auto s = sample_state(key, 5);
    EXPECT_TRUE(s.signature_valid());
    const Bytes b = serialize(s);
    EXPECT_EQ(deserialize_round_state(b), s);
    for (std::size_t i = 0; i < b.size(); i += 7) {
        Bytes t = b;
        t[i] ^= 1;
        try {
            EXPECT_FALSE(deserialize_round_state(t).signature_valid()) << i;
        } catch (const MalformedError&) {
        }
    }
}

TEST(RoundStateTest, AuthorityRejectsStaleAndForeignStates) {
    crypto::DeterministicRng rng(5, "authority");
    const auto key = crypto::SigningKey::generate(rng);
    const auto other = crypto::SigningKey::generate(rng);
    Authority a(key.public_key());
    EXPECT_TRUE(a.accept(sample_state(key, 2)));
    EXPECT_FALSE(a.accept(sample_state(key, 1)));
    EXPECT_FALSE(a.accept(sample_state(other, 3)));
    EXPECT_TRUE(a.accept(sample_state(key, 3)));
    EXPECT_EQ(a.previous()->round, 2u);
}

TEST(RoundStateTest, SignedCommandBindsWhatAndRound) {
    crypto::DeterministicRng rng(6, "command");
    const auto key = crypto::SigningKey::generate(rng);
    Authority a(key.public_key());
    ASSERT_TRUE(a.accept(sample_state(key, 4)));
    const auto id = NodeId::from_public_key(key.public_key());
    const auto cmd = deserialize_command(serialize(SignedCommand::make("close", 4, id, key)));
    EXPECT_TRUE(a.verify(cmd, "close"));
    EXPECT_FALSE(a.verify(cmd, "rotate"));
    auto bumped = cmd;
    bumped.round = 5;
    EXPECT_FALSE(a.verify(bumped, "close"));
}

TEST(RoundStateTest, MailboxIndexIsStableAndSpreads) {
    ByteArray<32> salt{};
    salt.fill(3);
    std::vector<std::uint64_t> counts(16, 0);
    for (int i = 0; i < 3200; ++i) {
        const std::string who = "u" + std::to_string(i) + "@example.org";
        const auto idx = mailbox_index(who, 7, salt, 16);
        ASSERT_LT(idx, 16u);
        ASSERT_EQ(idx, mailbox_index(who, 7, salt, 16));
        ++counts[idx];
    }
    EXPECT_GT(sim::chi_square_uniform(counts).p_value, 0.001);
}

TEST(Report, SerializationRoundTripsAndRejectsTruncation) {
    coordinator::RoundReport r{9, false, 10, 10, 2, 5, 3, 1, 1};
    EXPECT_TRUE(r.conserved());
    const Bytes b = coordinator::serialize(r);
    EXPECT_EQ(coordinator::deserialize_report(b), r);
    for (std::size_t n = 0; n < b.size(); ++n)
        EXPECT_THROW(coordinator::deserialize_report(ByteView(b).first(n)), MalformedError);
}

// ---------------------------------------------------------------------------
// Client helpers

TEST(ClientHelpers, RouteLengthUniformOverItsRange) {
    crypto::DeterministicRng rng(8, "route");
    std::vector<std::uint64_t> lengths(4, 0);  // lengths 2..5
    std::vector<std::uint64_t> first(6, 0);
    for (int i = 0; i < 8000; ++i) {
        const auto route = client::choose_route(6, 5, rng);
        ASSERT_GE(route.size(), 2u);
        ASSERT_LE(route.size(), 5u);
        ASSERT_EQ(std::set<std::size_t>(route.begin(), route.end()).size(), route.size());
        ++lengths[route.size() - 2];
        ++first[route[0]];
    }
    EXPECT_GT(sim::chi_square_uniform(lengths).p_value, 0.001);
    EXPECT_GT(sim::chi_square_uniform(first).p_value, 0.001);
}

TEST(ClientHelpers, RouteWithFewMixers) {
    crypto::DeterministicRng rng(9, "route");
    EXPECT_EQ(client::choose_route(1, 5, rng).size(), 1u);
    for (int i = 0; i < 50; ++i) EXPECT_EQ(client::choose_route(2, 5, rng).size(), 2u);
}

TEST(ClientHelpers, SessionRoundTrips) {
    crypto::DeterministicRng rng(10, "session");
    const auto master = crypto::ibe_setup(rng, crypto::CurvePreset::TypeATiny);
    const auto key = crypto::SigningKey::generate(rng);
    client::ClientSession s;
    s.identity = "g@example.org";
    s.round = 4;
    s.own_key = crypto::ibe_extract(master, s.identity);
    s.bundle.round = 4;
    s.bundle.mpk = envelope::serialize(master.mpk);
    s.bundle.state = sample_state(key, 4);
    s.mailbox_index = 3;
    s.mailbox_id = box(5);
    const Bytes b = client::serialize(s);
    const auto back = client::deserialize_session(b);
    EXPECT_EQ(client::serialize(back), b);
    EXPECT_EQ(back.identity, s.identity);
    EXPECT_EQ(back.bundle, s.bundle);
    EXPECT_TRUE(crypto::ibe_verify_key(master.mpk, back.own_key));
    EXPECT_THROW(client::deserialize_session(ByteView(b).first(b.size() - 1)), MalformedError);
}

TEST(ClientHelpers, VerifyBundleRejectsTampering) {
    crypto::DeterministicRng rng(11, "bundle");
    const auto master = crypto::ibe_setup(rng, crypto::CurvePreset::TypeATiny);
    const auto key = crypto::SigningKey::generate(rng);
    info::KeyBundle b;
    b.round = 2;
    b.mpk = envelope::serialize(master.mpk);
    b.state = sample_state(key, 2);
    b.state.mpk_digest = digest_mpk(b.mpk);
    b.state.sign(key);
    info::MixerKeyRecord rec;
    rec.mixer_id = b.state.directory.mixers[0].id;
    rec.round = 2;
    rec.address = mixer_address("m0:1");
    b.records.push_back(rec);
    {
        Authority a(key.public_key());
        EXPECT_TRUE(client::verify_bundle(a, b).ok());
    }
    {
        Authority a(key.public_key());
        auto t = b;
        t.mpk.back() ^= 1;
        EXPECT_FALSE(client::verify_bundle(a, t).ok());
    }
    {
        Authority a(key.public_key());
        auto t = b;
        t.records.clear();
        EXPECT_FALSE(client::verify_bundle(a, t).ok());
    }
    {
        Authority a(crypto::SigningKey::generate(rng).public_key());
        EXPECT_FALSE(client::verify_bundle(a, b).ok());
    }
}

}  // namespace
}  // namespace zephyr
