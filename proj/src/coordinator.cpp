#include "zephyr/coordinator.hpp"

#include <algorithm>

#include "zephyr/envelope.hpp"
#include "zephyr/info_node.hpp"
#include "zephyr/wire.hpp"

namespace zephyr::coordinator {

using net::Opcode;

Bytes serialize(const RoundReport& r) {
    wire::Writer w;
    w.version().u64(r.round).u8(r.aborted ? 1 : 0);
    w.u64(r.received).u64(r.peeled).u64(r.dropped).u64(r.forwarded).u64(r.uploaded).u64(r.duplicates).u64(r.malformed);
    return std::move(w).take();
}

RoundReport deserialize_report(ByteView b) {
    wire::Reader r(b);
    r.version();
    RoundReport rep;
    rep.round = r.u64();
    const std::size_t at = r.offset();
    const std::uint8_t aborted = r.u8();
    if (aborted > 1) throw MalformedError(at, "aborted flag must be 0 or 1");
    rep.aborted = aborted == 1;
    rep.received = r.u64();
    rep.peeled = r.u64();
    rep.dropped = r.u64();
    rep.forwarded = r.u64();
    rep.uploaded = r.u64();
    rep.duplicates = r.u64();
    rep.malformed = r.u64();
    r.finish();
    return rep;
}

Plan plan_from_state(const RoundState& s, const Plan& timings) {
    Plan p = timings;
    p.mixer_endpoints.clear();
    for (const auto& m : s.directory.mixers) p.mixer_endpoints.push_back(m.endpoint);
    p.info_nodes = s.directory.info_nodes;
    p.mailbox_servers = s.directory.mailbox_servers;
    p.pkg_endpoint = s.directory.pkg_endpoint;
    p.mailbox_count = s.directory.mailbox_count;
    p.salt = s.directory.salt;
    p.round_duration = static_cast<net::Duration>(s.directory.round_duration);
    return p;
}

NodeId round_state_key(std::uint64_t round) {
    wire::Writer w;
    w.u64(round);
    return NodeId::of("round-state", w.data());
}

Bytes make_heartbeat(std::uint64_t round, const NodeId& issuer, const crypto::SigningKey& key) {
    return serialize(SignedCommand::make("heartbeat", round, issuer, key));
}

// ---------------------------------------------------------------------------
// CoordinatorCore

CoordinatorCore::CoordinatorCore(net::Rpc& rpc, dht::Dht* dht, const crypto::SigningKey& key, Plan plan)
    : rpc_(rpc), dht_(dht), key_(key), plan_(std::move(plan)), alive_(std::make_shared<bool>(true)) {
    heartbeat();
}

CoordinatorCore::~CoordinatorCore() { stop(); }

void CoordinatorCore::stop() {
    if (!*alive_) return;
    *alive_ = false;
    auto& rt = rpc_.runtime();
    rt.cancel(close_timer_);
    rt.cancel(report_timer_);
    rt.cancel(heartbeat_timer_);
}

void CoordinatorCore::act(std::uint64_t round, RoundPhase phase) {
    rpc_.runtime().trace("coord-act round=" + std::to_string(round) + " phase=" + phase_name(phase) +
                         " node=" + rpc_.self().hex());
}

void CoordinatorCore::heartbeat() {
    const Bytes hb = make_heartbeat(round_, rpc_.self(), key_);
    for (const auto& ep : plan_.mixer_endpoints) rpc_.notify(ep, Opcode::Heartbeat, hb);
    auto alive = alive_;
    heartbeat_timer_ = rpc_.runtime().after(kHeartbeatInterval, [this, alive] {
        if (*alive) heartbeat();
    });
}

void CoordinatorCore::call_with_retry(const std::string& endpoint, Opcode op, Bytes payload, int attempts,
                                      std::function<void(net::Response)> done) {
    auto alive = alive_;
    rpc_.call(endpoint, op, payload, plan_.call_timeout,
              [this, alive, endpoint, op, payload, attempts, done](net::Response r) {
                  if (!*alive) return;
                  const bool retryable = !r.ok() && (*r.error == Errc::Timeout || *r.error == Errc::Unreachable);
                  if (retryable && attempts > 1) return call_with_retry(endpoint, op, payload, attempts - 1, done);
                  if (done) done(std::move(r));
              });
}

void CoordinatorCore::prepare(std::uint64_t round) {
    auto& rt = rpc_.runtime();
    rt.cancel(close_timer_);
    rt.cancel(report_timer_);
    round_ = round;
    phase_ = RoundPhase::Rotating;
    reports_.clear();
    rotated_.clear();
    laggards_.clear();
    done_fired_ = false;
    mpk_.reset();
    mpk_bytes_.clear();
    act(round - 1, RoundPhase::Rotating);
    rotate_master(round);
}

void CoordinatorCore::rotate_master(std::uint64_t round) {
    const Bytes cmd = serialize(SignedCommand::make("rotate-master", round, rpc_.self(), key_));
    auto alive = alive_;
    rpc_.call(plan_.pkg_endpoint, Opcode::RotateMaster, cmd, plan_.rotate_timeout, [this, alive, round](net::Response r) {
        if (!*alive || round != round_) return;
        if (r.ok()) {
            try {
                wire::Reader rd(r.payload);
                const std::uint64_t got = rd.u64();
                Bytes mpk = rd.bytes(64 * 1024);
                rd.finish();
                if (got == round) {
                    mpk_ = envelope::deserialize_mpk(mpk);
                    mpk_bytes_ = std::move(mpk);
                    rotate_mixers(round);
                    return;
                }
            } catch (const Error&) {
            }
        }
        rpc_.runtime().trace("rotation-timeout round=" + std::to_string(round) + " laggards=" + plan_.pkg_endpoint);
        rpc_.runtime().after(plan_.retry_delay, [this, alive, round] {
            if (*alive && round == round_) rotate_master(round);
        });
    });
}

void CoordinatorCore::rotate_mixers(std::uint64_t round) {
    const Bytes cmd = serialize(SignedCommand::make("rotate", round, rpc_.self(), key_));
    auto alive = alive_;
    auto pending = std::make_shared<std::size_t>(plan_.mixer_endpoints.size());
    auto settle = [this, alive, round, pending] {
        if (--*pending > 0) return;
        if (!laggards_.empty()) {
            std::string names;
            for (const auto& l : laggards_) names += (names.empty() ? "" : ",") + l;
            rpc_.runtime().trace("rotation-timeout round=" + std::to_string(round) + " laggards=" + names);
        }
        if (rotated_.empty()) {
            rpc_.runtime().trace("quorum-unreachable round=" + std::to_string(round));
            rpc_.runtime().after(plan_.retry_delay, [this, alive, round] {
                if (!*alive || round != round_) return;
                laggards_.clear();
                rotate_mixers(round);
            });
            return;
        }
        open(round);
    };
    if (plan_.mixer_endpoints.empty()) {
        ++*pending;
        settle();
        return;
    }
    for (const auto& ep : plan_.mixer_endpoints) {
        rpc_.call(ep, Opcode::Rotate, cmd, plan_.rotate_timeout, [this, alive, round, ep, settle](net::Response r) {
            if (!*alive || round != round_) return;
            bool ok = false;
            if (r.ok()) {
                try {
                    wire::Reader rd(r.payload);
                    const std::uint64_t got = rd.u64();
                    const auto sign_key = rd.array<crypto::kSignPublicKeySize>();
                    rd.finish();
                    const NodeId id = NodeId::from_public_key(sign_key);
                    const bool dup = std::any_of(rotated_.begin(), rotated_.end(),
                                                 [&](const MixerEntry& m) { return m.id == id; });
                    if (got == round && id == r.sender && !dup) {
                        rotated_.push_back(MixerEntry{id, ep, sign_key});
                        ok = true;
                    }
                } catch (const Error&) {
                }
            }
            if (!ok) laggards_.push_back(ep);
            settle();
        });
    }
}

void CoordinatorCore::open(std::uint64_t round) {
    RoundState s;
    s.round = round;
    s.directory.mixers = rotated_;
    std::sort(s.directory.mixers.begin(), s.directory.mixers.end(),
              [](const MixerEntry& a, const MixerEntry& b) { return a.id < b.id; });
    s.directory.info_nodes = plan_.info_nodes;
    s.directory.mailbox_servers = plan_.mailbox_servers;
    s.directory.mailbox_count = plan_.mailbox_count;
    s.directory.pkg_endpoint = plan_.pkg_endpoint;
    s.directory.salt = plan_.salt;
    s.directory.round_duration = static_cast<std::uint64_t>(plan_.round_duration);
    s.phase = RoundPhase::Open;
    s.coordinator = rpc_.self();
    s.coordinator_endpoint = rpc_.runtime().endpoint();
    s.last_mixer = s.directory.mixers[rpc_.runtime().rng().uniform(s.directory.mixers.size())].id;
    s.mpk_digest = digest_mpk(mpk_bytes_);
    s.sign(key_);
    state_ = s;
    phase_ = RoundPhase::Open;
    act(round, RoundPhase::Open);
    rpc_.runtime().trace("round-open round=" + std::to_string(round) + " coordinator=" + rpc_.self().hex() +
                         " mixers=" + std::to_string(s.directory.mixers.size()));
    if (on_open) on_open(s);

    const Bytes payload = info::serialize(info::OpenRound{s, mpk_bytes_});
    std::vector<std::string> targets = plan_.mixer_endpoints;
    for (const auto* list : {&plan_.info_nodes, &plan_.mailbox_servers}) targets.insert(targets.end(), list->begin(), list->end());
    targets.push_back(plan_.pkg_endpoint);
    for (const auto& ep : targets) call_with_retry(ep, Opcode::OpenRound, payload, 3, nullptr);

    const Bytes state_bytes = serialize(s);
    if (dht_ && state_bytes.size() <= dht::kMaxValueSize) dht_->store(round_state_key(round), state_bytes, [](bool) {}, true);

    auto alive = alive_;
    close_timer_ = rpc_.runtime().after(plan_.round_duration, [this, alive] {
        if (*alive) close();
    });
}

void CoordinatorCore::resume(const RoundState& state, bool closed, net::Time close_at) {
    auto& rt = rpc_.runtime();
    rt.cancel(close_timer_);
    rt.cancel(report_timer_);
    state_ = state;
    round_ = state.round;
    reports_.clear();
    done_fired_ = false;
    auto alive = alive_;
    if (!closed) {
        phase_ = RoundPhase::Open;
        close_timer_ = rt.after(std::max<net::Duration>(0, close_at - rt.now()), [this, alive] {
            if (*alive) close();
        });
        return;
    }
    phase_ = RoundPhase::Mixing;
    const Bytes cmd = serialize(SignedCommand::make("close", round_, rpc_.self(), key_));
    for (const auto& m : state_->directory.mixers) call_with_retry(m.endpoint, Opcode::Close, cmd, 3, nullptr);
    report_timer_ = rt.after(plan_.report_timeout, [this, alive] {
        if (*alive) finish_round();
    });
}

void CoordinatorCore::close() {
    if (!state_ || phase_ != RoundPhase::Open) return;
    phase_ = RoundPhase::Mixing;
    act(round_, RoundPhase::Mixing);
    const Bytes cmd = serialize(SignedCommand::make("close", round_, rpc_.self(), key_));
    for (const auto& m : state_->directory.mixers) call_with_retry(m.endpoint, Opcode::Close, cmd, 3, nullptr);
    auto alive = alive_;
    report_timer_ = rpc_.runtime().after(plan_.report_timeout, [this, alive] {
        if (*alive) finish_round();
    });
}

void CoordinatorCore::on_report(const NodeId& mixer, const RoundReport& report) {
    if (!state_ || report.round != round_ || !state_->directory.find_mixer(mixer)) return;
    if (phase_ != RoundPhase::Mixing && phase_ != RoundPhase::Open) return;
    reports_[mixer] = report;
    if (reports_.size() == state_->directory.mixers.size()) finish_round();
}

void CoordinatorCore::finish_round() {
    if (done_fired_ || !state_) return;
    done_fired_ = true;
    rpc_.runtime().cancel(report_timer_);
    laggards_.clear();
    for (const auto& m : state_->directory.mixers)
        if (!reports_.count(m.id)) laggards_.push_back(m.endpoint);
    phase_ = RoundPhase::Closing;
    act(round_, RoundPhase::Closing);
    rpc_.runtime().trace("round-done round=" + std::to_string(round_) + " reports=" + std::to_string(reports_.size()));
    if (on_round_done) on_round_done(round_);
    else prepare(round_ + 1);
}

// ---------------------------------------------------------------------------
// Coordinator daemon

Coordinator::Coordinator(net::Rpc& rpc, dht::Dht* dht, const crypto::SigningKey& key, Plan plan)
    : rpc_(rpc), dht_(dht), key_(key), plan_(std::move(plan)), alive_(std::make_shared<bool>(true)) {
    rpc_.on(Opcode::ReportDone, [this](const net::Request& req, net::Responder resp) {
        if (!core_) throw Error(Errc::NotCoordinator, "not coordinating");
        ++reports_received_;
        core_->on_report(req.sender, deserialize_report(req.payload));
        resp.ok();
    });
    rpc_.on(Opcode::Handback, [this](const net::Request& req, net::Responder resp) {
        wire::Reader r(req.payload);
        const SignedCommand cmd = deserialize_command(r.bytes(1024));
        const RoundState state = deserialize_round_state(r.bytes(64 * 1024));
        r.finish();
        const MixerEntry* m = state.directory.find_mixer(cmd.issuer);
        const bool state_ok = state.signature_valid() &&
                              (state.signer == key_.public_key() || state.directory.find_mixer_by_key(state.signer));
        if (cmd.what != "handback" || !cmd.signature_valid() || !m || m->sign_key != cmd.signer || !state_ok ||
            cmd.round != state.round + 1)
            throw Error(Errc::Rejected, "handback rejected");
        if (core_) {
            resp.ok();
            return;
        }
        rpc_.runtime().trace("handback-accepted round=" + std::to_string(cmd.round) + " from=" + cmd.issuer.hex());
        recovering_ = false;
        resp.ok();
        activate(cmd.round);
    });
}

Coordinator::~Coordinator() {
    *alive_ = false;
    core_.reset();
}

void Coordinator::start(std::uint64_t first_round) { activate(first_round); }

void Coordinator::activate(std::uint64_t round) {
    core_ = std::make_unique<CoordinatorCore>(rpc_, dht_, key_, plan_);
    core_->prepare(round);
}

void Coordinator::reset() {
    *alive_ = false;
    alive_ = std::make_shared<bool>(true);
    core_.reset();
    recovering_ = false;
    empty_recovery_polls_ = 0;
}

void Coordinator::recover() {
    recovering_ = true;
    empty_recovery_polls_ = 0;
    rpc_.runtime().trace("coordinator-recovered node=" + rpc_.self().hex());
    announce_recovery();
}

void Coordinator::announce_recovery() {
    if (!recovering_ || core_) return;
    const Bytes cmd = serialize(SignedCommand::make("recovered", 0, rpc_.self(), key_));
    auto alive = alive_;
    auto pending = std::make_shared<std::size_t>(plan_.mixer_endpoints.size());
    auto replies = std::make_shared<std::size_t>(0);
    auto with_state = std::make_shared<std::size_t>(0);
    for (const auto& ep : plan_.mixer_endpoints) {
        rpc_.call(ep, Opcode::Recovered, cmd, plan_.call_timeout,
                  [this, alive, pending, replies, with_state](net::Response r) {
                      if (!*alive) return;
                      if (r.ok()) {
                          ++*replies;
                          try {
                              wire::Reader rd(r.payload);
                              if (rd.u64() != 0) ++*with_state;
                          } catch (const Error&) {
                          }
                      }
                      if (--*pending > 0 || !recovering_ || core_) return;
                      // No mixer holds any round: nothing to hand back, start over.
                      if (*replies > 0 && *with_state == 0 && ++empty_recovery_polls_ >= 3) {
                          recovering_ = false;
                          activate(1);
                      }
                  });
    }
    rpc_.runtime().after(net::seconds(1), [this, alive] {
        if (*alive) announce_recovery();
    });
}

std::size_t Coordinator::memory_estimate() const {
    std::size_t n = sizeof(*this);
    if (core_) {
        n += sizeof(CoordinatorCore) + core_->reports().size() * (sizeof(RoundReport) + 32);
        if (core_->state()) n += serialize(*core_->state()).size();
    }
    return n;
}

}  // namespace zephyr::coordinator
