#include "zephyr/mixer.hpp"

#include <algorithm>

#include "zephyr/mailbox.hpp"
#include "zephyr/wire.hpp"

namespace zephyr::mixer {

using net::Opcode;

namespace {

constexpr std::size_t kMaxPacket = 64 * 1024;
constexpr std::size_t kMaxForwardBatch = 1 << 20;
constexpr net::Duration kHeartbeatCheck = net::ms(250);

std::string round_tag(std::uint64_t round, const NodeId& self) {
    return "round=" + std::to_string(round) + " node=" + self.hex();
}

}  // namespace

std::vector<std::size_t> fisher_yates(std::size_t n, crypto::Rng& rng) {
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    for (std::size_t i = n; i-- > 1;) {
        const std::size_t j = static_cast<std::size_t>(rng.uniform(i + 1));
        std::swap(perm[i], perm[j]);
    }
    return perm;
}

const char* phase_name(Phase p) {
    switch (p) {
        case Phase::Collecting: return "collecting";
        case Phase::Barrier: return "barrier";
        case Phase::Mixing: return "mixing";
        case Phase::Done: return "done";
    }
    return "?";
}

void PhaseMachine::require(Phase expected, const char* event) const {
    if (phase_ != expected)
        throw Error(Errc::InvariantViolation,
                    std::string("mixer event '") + event + "' illegal in phase " + phase_name(phase_));
}

void PhaseMachine::open(std::uint64_t round) {
    require(Phase::Done, "open");
    if (round <= round_) throw Error(Errc::InvariantViolation, "mixer round must increase");
    round_ = round;
    phase_ = Phase::Collecting;
}

void PhaseMachine::close() {
    require(Phase::Collecting, "close");
    phase_ = Phase::Barrier;
}

void PhaseMachine::begin_mixing() {
    require(Phase::Barrier, "begin_mixing");
    phase_ = Phase::Mixing;
}

void PhaseMachine::finish() {
    require(Phase::Mixing, "finish");
    phase_ = Phase::Done;
}

Bytes encode_submit(std::uint64_t round, ByteView packet) {
    wire::Writer w;
    w.u64(round).bytes(packet);
    return std::move(w).take();
}

// ---------------------------------------------------------------------------

Mixer::Mixer(net::Rpc& rpc, dht::Dht& dht, Authority& authority, const crypto::SigningKey& key, MixerConfig config)
    : rpc_(rpc),
      dht_(dht),
      authority_(authority),
      key_(key),
      config_(std::move(config)),
      alive_(std::make_shared<bool>(true)) {
    rpc_.on(Opcode::Submit, [this](const net::Request& q, net::Responder r) { handle_submit(q, std::move(r)); });
    rpc_.on(Opcode::Forward, [this](const net::Request& q, net::Responder r) { handle_forward(q, std::move(r)); });
    rpc_.on(Opcode::Rotate, [this](const net::Request& q, net::Responder r) { handle_rotate(q, std::move(r)); });
    rpc_.on(Opcode::OpenRound, [this](const net::Request& q, net::Responder r) { handle_open(q, std::move(r)); });
    rpc_.on(Opcode::Close, [this](const net::Request& q, net::Responder r) { handle_close(q, std::move(r)); });
    rpc_.on(Opcode::Heartbeat, [this](const net::Request& q, net::Responder) { handle_heartbeat(q); });
    rpc_.on(Opcode::Takeover, [this](const net::Request& q, net::Responder r) { handle_takeover(q, std::move(r)); });
    rpc_.on(Opcode::Recovered, [this](const net::Request& q, net::Responder r) { handle_recovered(q, std::move(r)); });
    rpc_.on(Opcode::ReportDone, [this](const net::Request& q, net::Responder r) {
        if (!core_) throw Error(Errc::NotCoordinator, "not coordinating");
        core_->on_report(q.sender, coordinator::deserialize_report(q.payload));
        r.ok();
    });
    rpc_.on(Opcode::Metrics, [this](const net::Request&, net::Responder r) {
        wire::Writer w;
        w.u32(static_cast<std::uint32_t>(reports_.size()));
        for (const auto& [round, rep] : reports_) w.bytes(coordinator::serialize(rep));
        r.ok(std::move(w).take());
    });
    watch_heartbeat();
}

Mixer::~Mixer() {
    *alive_ = false;
    core_.reset();
}

void Mixer::reset() {
    *alive_ = false;
    alive_ = std::make_shared<bool>(true);
    core_.reset();
    machine_ = PhaseMachine{};
    for (auto& [r, k] : keys_) k.erase_secret();
    keys_.clear();
    data_.reset();
    reports_.clear();
    coordinator_id_ = NodeId{};
    coordinator_endpoint_.clear();
    electing_ = false;
    original_.reset();
    watch_heartbeat();
}

const RoundState* Mixer::current_state() const {
    const auto& cur = authority_.current();
    return cur ? &*cur : nullptr;
}

std::optional<envelope::KemPublicKey> Mixer::public_key(std::uint64_t round) const {
    auto it = keys_.find(round);
    if (it == keys_.end()) return std::nullopt;
    return it->second.public_key;
}

std::size_t Mixer::batch_size() const {
    if (!data_) return 0;
    std::size_t n = 0;
    for (const auto& [stage, v] : data_->inbox) n += v.size();
    return n;
}

std::size_t Mixer::memory_estimate() const {
    std::size_t n = sizeof(*this) + keys_.size() * sizeof(envelope::MixerKeyPair);
    if (data_) {
        n += sizeof(RoundData) + data_->seen.size() * 48;
        for (const auto& [stage, v] : data_->inbox)
            for (const auto& p : v) n += p.size() + sizeof(Bytes);
    }
    return n + reports_.size() * sizeof(RoundReport) + dht_.local_store().byte_size();
}

// ---------------------------------------------------------------------------
// Key rotation

void Mixer::handle_rotate(const net::Request& req, net::Responder resp) {
    const auto cmd = deserialize_command(req.payload);
    if (!authority_.verify(cmd, "rotate")) throw Error(Errc::NotCoordinator, "rotation not authorized");
    const std::uint64_t round = cmd.round;
    if (round <= machine_.round() && machine_.phase() != Phase::Done)
        throw Error(Errc::StaleRound, "round " + std::to_string(round) + " already open");
    if (round < machine_.round()) throw Error(Errc::StaleRound, "round " + std::to_string(round) + " is over");
    auto it = keys_.find(round);
    if (it == keys_.end()) it = keys_.emplace(round, envelope::MixerKeyPair::generate(rpc_.runtime().rng(), id())).first;

    info::MixerKeyRecord rec;
    rec.mixer_id = id();
    rec.round = round;
    rec.public_key = it->second.public_key;
    rec.address = mixer_address(rpc_.runtime().endpoint());
    rec.published_at = static_cast<std::uint64_t>(rpc_.runtime().now());

    std::vector<std::string> infos = config_.info_nodes;
    if (infos.empty() && current_state()) infos = current_state()->directory.info_nodes;
    if (infos.empty()) throw Error(Errc::ConfigInvalid, "no info nodes known");
    const std::size_t start = rpc_.runtime().rng().uniform(infos.size());
    std::rotate(infos.begin(), infos.begin() + static_cast<std::ptrdiff_t>(start), infos.end());

    auto alive = alive_;
    publish(rec, infos, 0, 0, [this, alive, resp, round](bool ok) mutable {
        if (!*alive) return;
        if (!ok) {
            rpc_.runtime().trace("publish-failed " + round_tag(round, id()));
            return resp.fail(Errc::Unreachable, "key publication failed");
        }
        wire::Writer w;
        w.u64(round).raw(key_.public_key());
        resp.ok(std::move(w).take());
    });
}

void Mixer::publish(const info::MixerKeyRecord& rec, std::vector<std::string> infos, std::size_t tried, int attempt,
                    std::function<void(bool)> done) {
    if (tried >= infos.size()) return done(false);
    auto alive = alive_;
    const std::string ep = infos[tried];
    rpc_.call(ep, Opcode::PublishKey, info::serialize(rec), config_.call_timeout,
              [this, alive, rec, infos, tried, attempt, done](net::Response r) {
                  if (!*alive) return;
                  if (r.ok()) return done(true);
                  if (attempt + 1 < config_.publish_attempts) {
                      rpc_.runtime().after(net::ms(100) << attempt, [this, alive, rec, infos, tried, attempt, done] {
                          if (*alive) publish(rec, infos, tried, attempt + 1, done);
                      });
                      return;
                  }
                  publish(rec, infos, tried + 1, 0, done);
              });
}

// ---------------------------------------------------------------------------
// Round lifecycle

void Mixer::handle_open(const net::Request& req, net::Responder resp) {
    const auto open = info::deserialize_open(req.payload);
    if (digest_mpk(open.mpk) != open.state.mpk_digest || !authority_.accept(open.state))
        throw Error(Errc::Rejected, "round state rejected");
    const RoundState& s = open.state;
    if (s.round <= machine_.round()) {
        resp.ok();
        return;
    }
    coordinator_id_ = s.coordinator;
    coordinator_endpoint_ = s.coordinator_endpoint;
    last_heartbeat_ = rpc_.runtime().now();
    electing_ = false;

    if (data_ && machine_.phase() != Phase::Done) {
        // The coordinator moved on without this mixer's report; everything still held is lost.
        auto& rep = data_->report;
        const std::size_t held = batch_size();
        rep.dropped += held;
        rep.aborted = true;
        if (machine_.phase() == Phase::Collecting) machine_.close();
        if (machine_.phase() == Phase::Barrier) machine_.begin_mixing();
        data_->inbox.clear();
        machine_.finish();
        reports_[data_->round] = rep;
    }
    for (auto it = keys_.begin(); it != keys_.end();) {
        if (it->first < s.round) {
            it->second.erase_secret();
            it = keys_.erase(it);
        } else {
            ++it;
        }
    }
    if (!s.directory.find_mixer(id())) {
        data_.reset();
        resp.ok();
        return;
    }
    machine_.open(s.round);
    data_ = std::make_unique<RoundData>();
    data_->round = s.round;
    data_->opened_at = rpc_.runtime().now();
    data_->stages = static_cast<std::uint32_t>(std::min(config_.max_route, s.directory.mixers.size()));
    data_->report.round = s.round;
    rpc_.runtime().trace("mixer-open " + round_tag(s.round, id()));
    resp.ok();
}

void Mixer::accept_packet(Bytes packet, std::uint32_t stage) {
    auto& d = *data_;
    ++packets_processed_;
    if (packet.size() < envelope::kLayerOverhead || packet.size() > kMaxPacket) {
        ++d.report.received;
        ++d.report.malformed;
        ++d.report.dropped;
        return;
    }
    if (!d.seen.insert(crypto::hash256("zephyr-dedupe", {ByteView(packet)})).second) {
        ++d.report.duplicates;
        return;
    }
    ++d.report.received;
    d.inbox[stage].push_back(std::move(packet));
}

void Mixer::handle_submit(const net::Request& req, net::Responder resp) {
    wire::Reader r(req.payload);
    const std::uint64_t round = r.u64();
    Bytes packet = r.bytes(kMaxPacket + 1);
    r.finish();
    if (!data_ || round != data_->round || machine_.phase() != Phase::Collecting)
        throw Error(Errc::WrongRound, "current round is " + std::to_string(machine_.round()) +
                                          (machine_.phase() == Phase::Collecting ? "" : " (closed)"));
    accept_packet(std::move(packet), 0);
    resp.ok();
}

void Mixer::handle_close(const net::Request& req, net::Responder resp) {
    const auto cmd = deserialize_command(req.payload);
    if (!authority_.verify(cmd, "close")) throw Error(Errc::NotCoordinator, "close not authorized");
    if (!data_ || cmd.round != data_->round)
        throw Error(Errc::WrongRound, "current round is " + std::to_string(machine_.round()));
    resp.ok();
    if (machine_.phase() != Phase::Collecting) return;
    machine_.close();
    rpc_.runtime().trace("mixer-close " + round_tag(data_->round, id()));
    start_barrier();
}

void Mixer::start_barrier() {
    auto alive = alive_;
    const std::uint64_t round = data_->round;
    data_->barrier_deadline = rpc_.runtime().after(config_.barrier_timeout, [this, alive, round] {
        if (*alive && data_ && data_->round == round) abort_round();
    });
    if (!config_.withhold_barrier) {
        rpc_.runtime().trace("barrier-signal " + round_tag(round, id()));
        dht_.barrier_signal(round, [](bool) {}, config_.barrier_timeout * 2);
    }
    rpc_.runtime().after(config_.barrier_poll, [this, alive, round] {
        if (*alive && data_ && data_->round == round) poll_barrier();
    });
}

void Mixer::poll_barrier() {
    if (machine_.phase() != Phase::Barrier) return;
    const RoundState* s = current_state();
    if (!s) return;
    const std::uint64_t round = data_->round;
    const std::size_t need = s->directory.mixers.size();
    auto alive = alive_;
    dht_.find_value(dht::Dht::barrier_key(round), [this, alive, round, need](Result<std::vector<dht::DhtValue>> r) {
        if (!*alive || !data_ || data_->round != round || machine_.phase() != Phase::Barrier) return;
        std::set<NodeId> ready;
        const RoundState* s = current_state();
        if (r.ok() && s) {
            for (const auto& v : *r.value) {
                if (v.value.size() != NodeId::kBytes) continue;
                NodeId m;
                std::copy(v.value.begin(), v.value.end(), m.bytes.begin());
                if (s->directory.find_mixer(m)) ready.insert(m);
            }
        }
        if (ready.size() == need) {
            rpc_.runtime().cancel(data_->barrier_deadline);
            rpc_.runtime().trace("barrier-passed " + round_tag(round, id()));
            machine_.begin_mixing();
            run_stage(0);
            return;
        }
        rpc_.runtime().after(config_.barrier_poll, [this, alive, round] {
            if (*alive && data_ && data_->round == round) poll_barrier();
        });
    });
}

void Mixer::abort_round() {
    if (machine_.phase() != Phase::Barrier) return;
    rpc_.runtime().trace("barrier-timeout " + round_tag(data_->round, id()));
    data_->report.aborted = true;
    data_->report.dropped += batch_size();
    data_->inbox.clear();
    machine_.begin_mixing();
    data_->stages_complete = true;
    finish_round();
}

void Mixer::run_stage(std::uint32_t stage) {
    auto& d = *data_;
    const RoundState* s = current_state();
    d.stage = stage;
    std::vector<Bytes> packets = std::move(d.inbox[stage]);
    d.inbox.erase(stage);

    auto key = keys_.find(d.round);
    std::vector<envelope::Peeled> out;
    out.reserve(packets.size());
    for (const auto& p : packets) {
        rpc_.runtime().trace("peel " + round_tag(d.round, id()));
        if (key == keys_.end()) {
            ++d.report.dropped;
            continue;
        }
        try {
            auto peeled = envelope::onion_peel(key->second, p);
            if (!peeled) {
                ++d.report.dropped;
                continue;
            }
            ++d.report.peeled;
            out.push_back(std::move(*peeled));
        } catch (const MalformedError&) {
            ++d.report.malformed;
            ++d.report.dropped;
        }
    }
    shuffle_batch(out, rpc_.runtime().rng());

    const bool last = stage + 1 >= d.stages;
    std::map<std::string, std::vector<mailbox::AppendItem>> uploads;
    std::map<NodeId, std::vector<Bytes>> forwards;
    for (auto& o : out) {
        const std::string ep = o.next.endpoint();
        if (o.next.kind == envelope::AddressKind::Mailbox) {
            const auto& servers = s->directory.mailbox_servers;
            if (std::find(servers.begin(), servers.end(), ep) == servers.end()) {
                ++d.report.dropped;
                continue;
            }
            uploads[ep].push_back({o.next.mailbox_id, std::move(o.inner)});
            continue;
        }
        const MixerEntry* m = nullptr;
        for (const auto& e : s->directory.mixers)
            if (e.endpoint == ep) m = &e;
        if (!m || last) {
            ++d.report.dropped;
            continue;
        }
        forwards[m->id].push_back(std::move(o.inner));
    }

    auto alive = alive_;
    const std::uint64_t round = d.round;
    if (!last) {
        for (const auto& m : s->directory.mixers) {
            auto batch = std::move(forwards[m.id]);
            if (m.id == id()) {
                d.report.forwarded += batch.size();
                for (auto& p : batch) accept_packet(std::move(p), stage + 1);
                d.forward_from[stage + 1].insert(id());
                continue;
            }
            wire::Writer w;
            w.u64(round).u32(stage + 1).u32(static_cast<std::uint32_t>(batch.size()));
            for (const auto& p : batch) w.bytes(p);
            const std::uint64_t n = batch.size();
            ++d.outstanding;
            rpc_.call(m.endpoint, Opcode::Forward, std::move(w).take(), config_.call_timeout * 4,
                      [this, alive, round, n](net::Response r) {
                          if (!*alive || !data_ || data_->round != round) return;
                          if (r.ok()) data_->report.forwarded += n;
                          else data_->report.dropped += n;
                          settle_one();
                      });
        }
    }
    for (auto& [ep, items] : uploads) {
        const std::uint64_t n = items.size();
        ++d.outstanding;
        rpc_.call(ep, Opcode::Append, mailbox::encode_append(round, items), config_.call_timeout * 4,
                  [this, alive, round, n](net::Response r) {
                      if (!*alive || !data_ || data_->round != round) return;
                      std::uint64_t stored = 0;
                      if (r.ok()) {
                          try {
                              wire::Reader rd(r.payload);
                              const std::uint32_t count = rd.u32();
                              for (std::uint32_t i = 0; i < count && i < n; ++i)
                                  if (rd.u64() != 0) ++stored;
                          } catch (const MalformedError&) {
                              stored = 0;
                          }
                      }
                      data_->report.uploaded += stored;
                      data_->report.dropped += n - stored;
                      settle_one();
                  });
    }

    if (last) {
        d.stages_complete = true;
        if (d.outstanding == 0) finish_round();
        return;
    }
    rpc_.runtime().cancel(d.stage_timer);
    d.stage_timer = rpc_.runtime().after(config_.stage_timeout, [this, alive, round, stage] {
        if (!*alive || !data_ || data_->round != round || data_->stage != stage || data_->stages_complete) return;
        rpc_.runtime().trace("stage-timeout " + round_tag(round, id()));
        run_stage(stage + 1);
    });
    maybe_advance();
}

void Mixer::handle_forward(const net::Request& req, net::Responder resp) {
    wire::Reader r(req.payload);
    const std::uint64_t round = r.u64();
    const std::uint32_t stage = r.u32();
    const std::size_t at = r.offset();
    const std::uint32_t n = r.u32();
    if (n > kMaxForwardBatch) throw MalformedError(at, "forward batch too large");
    std::vector<Bytes> packets(n);
    for (auto& p : packets) p = r.bytes(kMaxPacket + 1);
    r.finish();
    const RoundState* s = current_state();
    const Phase ph = machine_.phase();
    if (!data_ || !s || round != data_->round || (ph != Phase::Barrier && ph != Phase::Mixing))
        throw Error(Errc::WrongRound, "current round is " + std::to_string(machine_.round()));
    if (!s->directory.find_mixer(req.sender)) throw Error(Errc::Rejected, "sender is not a directory mixer");
    if (stage == 0 || stage >= data_->stages) throw Error(Errc::InvalidArgument, "stage out of range");
    if (stage <= data_->stage && ph == Phase::Mixing) {
        // Stage already ran (timeout); late packets cannot be mixed any more.
        data_->report.received += n;
        data_->report.dropped += n;
        resp.ok();
        return;
    }
    if (data_->forward_from[stage].insert(req.sender).second)
        for (auto& p : packets) accept_packet(std::move(p), stage);
    resp.ok();
    if (ph == Phase::Mixing) maybe_advance();
}

void Mixer::maybe_advance() {
    if (machine_.phase() != Phase::Mixing || data_->stages_complete) return;
    const RoundState* s = current_state();
    const std::uint32_t next = data_->stage + 1;
    if (next >= data_->stages) return;
    if (data_->forward_from[next].size() < s->directory.mixers.size()) return;
    rpc_.runtime().cancel(data_->stage_timer);
    run_stage(next);
}

void Mixer::settle_one() {
    --data_->outstanding;
    if (data_->stages_complete && data_->outstanding == 0 && machine_.phase() == Phase::Mixing) finish_round();
}

void Mixer::finish_round() {
    auto& d = *data_;
    machine_.finish();
    reports_[d.round] = d.report;
    while (reports_.size() > 8) reports_.erase(reports_.begin());
    auto key = keys_.find(d.round);
    if (key != keys_.end()) {
        key->second.erase_secret();
        keys_.erase(key);
    }
    const auto& rep = d.report;
    rpc_.runtime().trace("mixer-done " + round_tag(d.round, id()) + " received=" + std::to_string(rep.received) +
                         " dropped=" + std::to_string(rep.dropped) + " forwarded=" + std::to_string(rep.forwarded) +
                         " uploaded=" + std::to_string(rep.uploaded) + (rep.aborted ? " aborted" : ""));
    send_report(d.round);
}

void Mixer::send_report(std::uint64_t round) {
    auto it = reports_.find(round);
    if (it == reports_.end() || !data_ || data_->round != round) return;
    if (core_) {
        core_->on_report(id(), it->second);
        data_->report_acked = true;
        return;
    }
    auto alive = alive_;
    rpc_.call(coordinator_endpoint_, Opcode::ReportDone, coordinator::serialize(it->second), config_.call_timeout,
              [this, alive, round](net::Response r) {
                  if (!*alive || !data_ || data_->round != round) return;
                  if (r.ok()) {
                      data_->report_acked = true;
                      return;
                  }
                  rpc_.runtime().after(net::seconds(1), [this, alive, round] {
                      if (*alive && data_ && data_->round == round && !data_->report_acked) send_report(round);
                  });
              });
}

// ---------------------------------------------------------------------------
// Failover

void Mixer::handle_heartbeat(const net::Request& req) {
    try {
        const auto cmd = deserialize_command(req.payload);
        if (!authority_.verify(cmd, "heartbeat")) return;
        if (cmd.round + 1 < authority_.round()) return;
        if (core_ && cmd.issuer != id()) {
            // Another coordinator is active; a lower-id substitute or the original wins.
            if (cmd.signer != authority_.pinned() && !(cmd.issuer < id())) return;
            core_.reset();
        }
        last_heartbeat_ = rpc_.runtime().now();
        electing_ = false;
        coordinator_id_ = cmd.issuer;
        coordinator_endpoint_ = req.from;
    } catch (const MalformedError&) {
    }
}

void Mixer::watch_heartbeat() {
    auto alive = alive_;
    rpc_.runtime().after(kHeartbeatCheck, [this, alive] {
        if (!*alive) return;
        const RoundState* s = current_state();
        const bool member = s && s->directory.find_mixer(id());
        if (member && !core_ && !electing_ && rpc_.runtime().now() - last_heartbeat_ > config_.heartbeat_timeout)
            elect();
        watch_heartbeat();
    });
}

void Mixer::elect() {
    const RoundState* s = current_state();
    electing_ = true;
    rpc_.runtime().trace("election-start " + round_tag(s->round, id()));
    std::vector<const MixerEntry*> lower;
    for (const auto& m : s->directory.mixers)
        if (m.id < id()) lower.push_back(&m);
    if (lower.empty()) return become_substitute();
    auto alive = alive_;
    auto pending = std::make_shared<std::size_t>(lower.size());
    auto live = std::make_shared<bool>(false);
    const std::uint64_t round = s->round;
    for (const auto* m : lower) {
        rpc_.call(m->endpoint, Opcode::Ping, {}, config_.call_timeout, [this, alive, pending, live, round](net::Response r) {
            if (!*alive) return;
            if (r.ok()) *live = true;
            if (--*pending > 0 || !electing_ || authority_.round() != round) return;
            if (*live) {
                electing_ = false;
                last_heartbeat_ = rpc_.runtime().now();
                return;
            }
            become_substitute();
        });
    }
}

void Mixer::become_substitute() {
    const RoundState* s = current_state();
    electing_ = false;
    rpc_.runtime().trace("failover-takeover " + round_tag(s->round, id()));
    core_ = std::make_unique<coordinator::CoordinatorCore>(rpc_, &dht_, key_,
                                                            coordinator::plan_from_state(*s, config_.substitute_timings));
    core_->on_round_done = [this](std::uint64_t r) { on_substitute_round_done(r); };
    const bool in_round = data_ && data_->round == s->round;
    const bool closed = !in_round || machine_.phase() != Phase::Collecting;
    const net::Time close_at = (in_round ? data_->opened_at : rpc_.runtime().now()) +
                               static_cast<net::Duration>(s->directory.round_duration);
    core_->resume(*s, closed, close_at);
    coordinator_id_ = id();
    coordinator_endpoint_ = rpc_.runtime().endpoint();
    last_heartbeat_ = rpc_.runtime().now();

    const Bytes cmd = serialize(SignedCommand::make("takeover", s->round, id(), key_));
    for (const auto& m : s->directory.mixers)
        if (m.id != id()) rpc_.call(m.endpoint, Opcode::Takeover, cmd, config_.call_timeout, nullptr);
    auto it = reports_.find(s->round);
    if (it != reports_.end() && core_) core_->on_report(id(), it->second);
}

void Mixer::handle_takeover(const net::Request& req, net::Responder resp) {
    const auto cmd = deserialize_command(req.payload);
    if (!authority_.verify(cmd, "takeover") || cmd.round != authority_.round())
        throw Error(Errc::NotCoordinator, "takeover rejected");
    const MixerEntry* m = current_state()->directory.find_mixer(cmd.issuer);
    if (core_) {
        if (!(cmd.issuer < id())) throw Error(Errc::NotCoordinator, "a lower id already coordinates");
        rpc_.runtime().trace("failover-yield " + round_tag(cmd.round, id()));
        core_.reset();
    }
    coordinator_id_ = cmd.issuer;
    coordinator_endpoint_ = m->endpoint;
    last_heartbeat_ = rpc_.runtime().now();
    electing_ = false;
    resp.ok();
    if (data_ && data_->round == cmd.round && reports_.count(cmd.round)) {
        data_->report_acked = false;
        send_report(cmd.round);
    }
}

void Mixer::handle_recovered(const net::Request& req, net::Responder resp) {
    const auto cmd = deserialize_command(req.payload);
    if (cmd.what != "recovered" || !cmd.signature_valid() || cmd.signer != authority_.pinned())
        throw Error(Errc::Rejected, "recovery notice rejected");
    original_ = std::make_pair(cmd.issuer, req.from);
    wire::Writer w;
    w.u64(authority_.round()).u8(core_ ? 1 : 0);
    resp.ok(std::move(w).take());
}

void Mixer::on_substitute_round_done(std::uint64_t round) {
    if (!original_) {
        core_->prepare(round + 1);
        return;
    }
    const RoundState* s = current_state();
    wire::Writer w;
    w.bytes(serialize(SignedCommand::make("handback", round + 1, id(), key_))).bytes(serialize(*s));
    auto alive = alive_;
    const auto target = original_->second;
    rpc_.call(target, Opcode::Handback, std::move(w).take(), config_.call_timeout * 4,
              [this, alive, round](net::Response r) {
                  if (!*alive || !core_) return;
                  if (r.ok()) {
                      rpc_.runtime().trace("handback " + round_tag(round + 1, id()));
                      original_.reset();
                      core_.reset();
                      last_heartbeat_ = rpc_.runtime().now();
                      return;
                  }
                  original_.reset();
                  core_->prepare(round + 1);
              });
}

}  // namespace zephyr::mixer
