#include "zephyr/round_state.hpp"

#include "zephyr/crypto/rng.hpp"
#include "zephyr/net/frame.hpp"
#include "zephyr/net/live.hpp"
#include "zephyr/wire.hpp"

namespace zephyr {

namespace {

constexpr std::size_t kMaxListSize = 4096;

NodeId read_node_id(wire::Reader& r) {
    NodeId id;
    id.bytes = r.array<NodeId::kBytes>();
    return id;
}

std::uint32_t read_count(wire::Reader& r) {
    const std::size_t at = r.offset();
    const std::uint32_t n = r.u32();
    if (n > kMaxListSize) throw MalformedError(at, "list too long");
    return n;
}

void write_endpoints(wire::Writer& w, const std::vector<std::string>& v) {
    w.u32(static_cast<std::uint32_t>(v.size()));
    for (const auto& e : v) w.str(e);
}

std::vector<std::string> read_endpoints(wire::Reader& r) {
    std::vector<std::string> out(read_count(r));
    for (auto& e : out) e = r.str(net::kMaxEndpointSize);
    return out;
}

void write_directory(wire::Writer& w, const Directory& d) {
    w.u32(static_cast<std::uint32_t>(d.mixers.size()));
    for (const auto& m : d.mixers) w.raw(m.id.bytes).str(m.endpoint).raw(m.sign_key);
    write_endpoints(w, d.info_nodes);
    write_endpoints(w, d.mailbox_servers);
    w.u32(d.mailbox_count).str(d.pkg_endpoint).raw(d.salt).u64(d.round_duration);
}

Directory read_directory(wire::Reader& r) {
    Directory d;
    const std::uint32_t n = read_count(r);
    for (std::uint32_t i = 0; i < n; ++i) {
        MixerEntry m;
        const std::size_t at = r.offset();
        m.id = read_node_id(r);
        m.endpoint = r.str(net::kMaxEndpointSize);
        m.sign_key = r.array<crypto::kSignPublicKeySize>();
        if (!d.mixers.empty() && !(d.mixers.back().id < m.id)) throw MalformedError(at, "mixers not sorted");
        d.mixers.push_back(std::move(m));
    }
    d.info_nodes = read_endpoints(r);
    d.mailbox_servers = read_endpoints(r);
    const std::size_t at = r.offset();
    d.mailbox_count = r.u32();
    if (d.mailbox_count == 0) throw MalformedError(at, "mailbox_count must be positive");
    d.pkg_endpoint = r.str(net::kMaxEndpointSize);
    d.salt = r.array<32>();
    d.round_duration = r.u64();
    return d;
}

}  // namespace

const MixerEntry* Directory::find_mixer(const NodeId& id) const {
    for (const auto& m : mixers)
        if (m.id == id) return &m;
    return nullptr;
}

const MixerEntry* Directory::find_mixer_by_key(const crypto::SignPublicKey& key) const {
    for (const auto& m : mixers)
        if (m.sign_key == key) return &m;
    return nullptr;
}

const char* phase_name(RoundPhase p) {
    switch (p) {
        case RoundPhase::Open: return "open";
        case RoundPhase::Mixing: return "mixing";
        case RoundPhase::Closing: return "closing";
        case RoundPhase::Rotating: return "rotating";
    }
    return "?";
}

Bytes RoundState::signed_bytes() const {
    wire::Writer w;
    w.version().str("zephyr-round-state").u64(round);
    write_directory(w, directory);
    w.u8(static_cast<std::uint8_t>(phase))
        .raw(coordinator.bytes)
        .str(coordinator_endpoint)
        .raw(last_mixer.bytes)
        .raw(mpk_digest)
        .raw(signer);
    return std::move(w).take();
}

void RoundState::sign(const crypto::SigningKey& key) {
    signer = key.public_key();
    signature = key.sign(signed_bytes());
}

bool RoundState::signature_valid() const { return crypto::verify_signature(signer, signed_bytes(), signature); }

void write_round_state(wire::Writer& w, const RoundState& s) {
    w.u64(s.round);
    write_directory(w, s.directory);
    w.u8(static_cast<std::uint8_t>(s.phase))
        .raw(s.coordinator.bytes)
        .str(s.coordinator_endpoint)
        .raw(s.last_mixer.bytes)
        .raw(s.mpk_digest)
        .raw(s.signer)
        .raw(s.signature);
}

RoundState read_round_state(wire::Reader& r) {
    RoundState s;
    s.round = r.u64();
    s.directory = read_directory(r);
    const std::size_t at = r.offset();
    const std::uint8_t phase = r.u8();
    if (phase > static_cast<std::uint8_t>(RoundPhase::Rotating)) throw MalformedError(at, "unknown phase");
    s.phase = static_cast<RoundPhase>(phase);
    s.coordinator = read_node_id(r);
    s.coordinator_endpoint = r.str(net::kMaxEndpointSize);
    s.last_mixer = read_node_id(r);
    s.mpk_digest = r.array<32>();
    s.signer = r.array<crypto::kSignPublicKeySize>();
    s.signature = r.array<crypto::kSignatureSize>();
    return s;
}

Bytes serialize(const RoundState& s) {
    wire::Writer w;
    w.version();
    write_round_state(w, s);
    return std::move(w).take();
}

RoundState deserialize_round_state(ByteView b) {
    wire::Reader r(b);
    r.version();
    RoundState s = read_round_state(r);
    r.finish();
    return s;
}

SignedCommand SignedCommand::make(std::string what, std::uint64_t round, const NodeId& issuer,
                                  const crypto::SigningKey& key) {
    SignedCommand c;
    c.what = std::move(what);
    c.round = round;
    c.issuer = issuer;
    c.signer = key.public_key();
    c.signature = key.sign(c.signed_bytes());
    return c;
}

Bytes SignedCommand::signed_bytes() const {
    wire::Writer w;
    w.version().str("zephyr-command").str(what).u64(round).raw(issuer.bytes).raw(signer);
    return std::move(w).take();
}

bool SignedCommand::signature_valid() const { return crypto::verify_signature(signer, signed_bytes(), signature); }

Bytes serialize(const SignedCommand& c) {
    wire::Writer w;
    w.version().str(c.what).u64(c.round).raw(c.issuer.bytes).raw(c.signer).raw(c.signature);
    return std::move(w).take();
}

SignedCommand deserialize_command(ByteView b) {
    wire::Reader r(b);
    r.version();
    SignedCommand c;
    c.what = r.str(64);
    c.round = r.u64();
    c.issuer = read_node_id(r);
    c.signer = r.array<crypto::kSignPublicKeySize>();
    c.signature = r.array<crypto::kSignatureSize>();
    r.finish();
    return c;
}

bool Authority::trusted_signer(const crypto::SignPublicKey& key) const {
    if (key == pinned_) return true;
    return current_ && current_->directory.find_mixer_by_key(key) != nullptr;
}

bool Authority::accept(const RoundState& s) {
    if (!s.signature_valid() || !trusted_signer(s.signer)) return false;
    if (s.signer != pinned_) {
        const MixerEntry* m = current_->directory.find_mixer_by_key(s.signer);
        if (!m || m->id != s.coordinator) return false;
    }
    if (current_ && s.round < current_->round) return false;
    if (current_ && s.round == current_->round) {
        current_ = s;
        return true;
    }
    previous_ = std::move(current_);
    current_ = s;
    return true;
}

bool Authority::verify(const SignedCommand& c, std::string_view expected_what) const {
    if (c.what != expected_what || !c.signature_valid() || !trusted_signer(c.signer)) return false;
    if (c.signer != pinned_) {
        const MixerEntry* m = current_->directory.find_mixer_by_key(c.signer);
        if (!m || m->id != c.issuer) return false;
    }
    return true;
}

crypto::Digest32 digest_mpk(ByteView mpk) { return crypto::hash256("zephyr-mpk", {mpk}); }

std::uint32_t mailbox_index(std::string_view identity, std::uint64_t round, const ByteArray<32>& salt,
                            std::uint32_t mailbox_count) {
    if (mailbox_count == 0) throw Error(Errc::InvalidArgument, "mailbox_count must be positive");
    const std::string folded = crypto::fold_identity(identity);
    wire::Writer w;
    w.str(folded).u64(round).raw(salt);
    const auto seed = crypto::hash256("zephyr-mailbox-seed", {w.data()});
    crypto::DeterministicRng prng{ByteView(seed)};
    return static_cast<std::uint32_t>(prng.uniform(mailbox_count));
}

envelope::MailboxId mailbox_id_for(std::uint32_t index, const ByteArray<32>& salt) {
    wire::Writer w;
    w.raw(salt).u32(index);
    return crypto::hash256("zephyr-mailbox", {w.data()});
}

envelope::Address mailbox_address(const Directory& d, std::uint32_t index) {
    if (d.mailbox_servers.empty()) throw Error(Errc::ConfigInvalid, "directory lists no mailbox servers");
    const auto& ep = d.mailbox_servers[index % d.mailbox_servers.size()];
    auto [host, port] = net::split_endpoint(ep);
    return envelope::Address::mailbox(host, port, mailbox_id_for(index, d.salt));
}

envelope::Address mixer_address(const std::string& endpoint) {
    auto [host, port] = net::split_endpoint(endpoint);
    return envelope::Address::mixer(host, port);
}

}  // namespace zephyr
