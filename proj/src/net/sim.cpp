#include "zephyr/net/sim.hpp"

#include "zephyr/error.hpp"

namespace zephyr::net {

SimRuntime::SimRuntime(SimNetwork& net, std::string endpoint, std::uint64_t seed)
    : net_(net), endpoint_(std::move(endpoint)), rng_(seed, "sim-node:" + endpoint_) {}

Time SimRuntime::now() const { return net_.now_; }

TimerId SimRuntime::after(Duration delay, std::function<void()> fn) {
    return net_.schedule(net_.now_ + std::max<Duration>(delay, 0), this, std::move(fn));
}

void SimRuntime::cancel(TimerId id) { net_.unschedule(id); }

void SimRuntime::send(const std::string& endpoint, Bytes frame) {
    if (!up_) return;
    net_.transmit(*this, endpoint, std::move(frame));
}

void SimRuntime::trace(std::string_view event) {
    if (net_.on_trace) net_.on_trace(net_.now_, endpoint_, event);
}

SimNetwork::SimNetwork(std::uint64_t seed) : rng_(seed, "sim-network"), seed_(seed) {}

SimNetwork::~SimNetwork() = default;

SimRuntime& SimNetwork::add_node(const std::string& endpoint) {
    if (nodes_.count(endpoint)) throw Error(Errc::ConfigInvalid, "duplicate sim endpoint " + endpoint);
    auto rt = std::unique_ptr<SimRuntime>(new SimRuntime(*this, endpoint, seed_));
    auto& ref = *rt;
    nodes_.emplace(endpoint, std::move(rt));
    return ref;
}

SimRuntime* SimNetwork::node(const std::string& endpoint) {
    auto it = nodes_.find(endpoint);
    return it == nodes_.end() ? nullptr : it->second.get();
}

void SimNetwork::crash(const std::string& endpoint) {
    auto* n = node(endpoint);
    if (!n || !n->up_) return;
    n->up_ = false;
    ++n->epoch_;
    n->trace("crash");
    if (n->on_crash) n->on_crash();
}

void SimNetwork::recover(const std::string& endpoint) {
    auto* n = node(endpoint);
    if (!n || n->up_) return;
    n->up_ = true;
    n->trace("recover");
    if (n->on_recover) n->on_recover();
}

void SimNetwork::set_drop_rate(const std::string& endpoint, double rate) {
    if (auto* n = node(endpoint)) n->drop_rate_ = rate;
}

void SimNetwork::set_latency(Duration min, Duration max) {
    if (min < 0 || max < min) throw Error(Errc::ConfigInvalid, "latency range");
    latency_min_ = min;
    latency_max_ = max;
}

TimerId SimNetwork::at(Time t, std::function<void()> fn) { return schedule(t, nullptr, std::move(fn)); }

TimerId SimNetwork::schedule(Time t, SimRuntime* owner, std::function<void()> fn) {
    const std::uint64_t id = ++seq_;
    const Key key{std::max(t, now_), id};
    queue_.emplace(key, Event{std::move(fn), owner, owner ? owner->epoch_ : 0});
    timers_.emplace(id, key);
    return id;
}

void SimNetwork::unschedule(TimerId id) {
    auto it = timers_.find(id);
    if (it == timers_.end()) return;
    queue_.erase(it->second);
    timers_.erase(it);
}

void SimNetwork::transmit(SimRuntime& from, const std::string& to, Bytes frame) {
    from.stats_.bytes_sent += frame.size() + 4;
    ++from.stats_.frames_sent;
    SimRuntime* dest = node(to);
    if (!dest) return;
    const double loss = 1.0 - (1.0 - from.drop_rate_) * (1.0 - dest->drop_rate_);
    if (loss > 0.0 && rng_.unit() < loss) return;
    const Duration span = latency_max_ - latency_min_;
    const Duration latency =
        latency_min_ + (span > 0 ? static_cast<Duration>(rng_.uniform(static_cast<std::uint64_t>(span) + 1)) : 0);
    schedule(now_ + latency, dest, [dest, frame = std::move(frame)]() mutable {
        if (!dest->up_ || !dest->receiver_) return;
        dest->stats_.bytes_received += frame.size() + 4;
        ++dest->stats_.frames_received;
        dest->receiver_(std::move(frame));
    });
}

bool SimNetwork::step() {
    if (queue_.empty()) return false;
    auto it = queue_.begin();
    const Key key = it->first;
    Event ev = std::move(it->second);
    queue_.erase(it);
    timers_.erase(key.second);
    now_ = key.first;
    if (ev.owner && (!ev.owner->up_ || ev.owner->epoch_ != ev.epoch)) return true;
    ev.fn();
    return true;
}

void SimNetwork::run_until(Time t) {
    while (!queue_.empty() && queue_.begin()->first.first <= t) step();
    if (now_ < t) now_ = t;
}

bool SimNetwork::run_until(const std::function<bool()>& done, Time deadline) {
    while (!done()) {
        if (queue_.empty() || queue_.begin()->first.first > deadline) {
            if (now_ < deadline) now_ = deadline;
            return done();
        }
        step();
    }
    return true;
}

}  // namespace zephyr::net
