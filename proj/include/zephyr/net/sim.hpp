#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "zephyr/crypto/rng.hpp"
#include "zephyr/net/runtime.hpp"

namespace zephyr::net {

class SimNetwork;

struct LinkStats {
    std::uint64_t bytes_sent = 0;
    std::uint64_t bytes_received = 0;
    std::uint64_t frames_sent = 0;
    std::uint64_t frames_received = 0;
};

/// One node's view of the simulated network. Timers and in-flight frames die
/// with a crash; the node's state object is expected to rebuild on recover.
class SimRuntime final : public Runtime {
public:
    Time now() const override;
    TimerId after(Duration delay, std::function<void()> fn) override;
    void cancel(TimerId id) override;
    void send(const std::string& endpoint, Bytes frame) override;
    void set_receiver(Receiver receiver) override { receiver_ = std::move(receiver); }
    const std::string& endpoint() const override { return endpoint_; }
    crypto::Rng& rng() override { return rng_; }
    void trace(std::string_view event) override;

    bool up() const { return up_; }
    const LinkStats& stats() const { return stats_; }
    std::function<void()> on_crash;
    std::function<void()> on_recover;

private:
    friend class SimNetwork;
    SimRuntime(SimNetwork& net, std::string endpoint, std::uint64_t seed);

    SimNetwork& net_;
    std::string endpoint_;
    crypto::DeterministicRng rng_;
    Receiver receiver_;
    LinkStats stats_;
    bool up_ = true;
    std::uint64_t epoch_ = 0;
    double drop_rate_ = 0.0;
};

/// Deterministic discrete-event network: one ordered event queue keyed by
/// (virtual time, insertion sequence); all randomness from the seed.
class SimNetwork {
public:
    explicit SimNetwork(std::uint64_t seed);
    ~SimNetwork();
    SimNetwork(const SimNetwork&) = delete;
    SimNetwork& operator=(const SimNetwork&) = delete;

    SimRuntime& add_node(const std::string& endpoint);
    SimRuntime* node(const std::string& endpoint);

    void crash(const std::string& endpoint);
    void recover(const std::string& endpoint);
    /// Probability that a frame to or from the node is lost.
    void set_drop_rate(const std::string& endpoint, double rate);
    void set_latency(Duration min, Duration max);

    Time now() const { return now_; }
    /// Schedules a harness-level event (not owned by any node).
    TimerId at(Time t, std::function<void()> fn);
    bool step();
    void run_until(Time t);
    void run_for(Duration d) { run_until(now_ + d); }
    /// Runs until `done` holds or virtual time passes `deadline`; returns done().
    bool run_until(const std::function<bool()>& done, Time deadline);
    std::size_t pending_events() const { return queue_.size(); }

    std::function<void(Time, const std::string&, std::string_view)> on_trace;

private:
    friend class SimRuntime;
    struct Event {
        std::function<void()> fn;
        SimRuntime* owner;  // nullptr for harness events
        std::uint64_t epoch;
    };
    using Key = std::pair<Time, std::uint64_t>;

    TimerId schedule(Time t, SimRuntime* owner, std::function<void()> fn);
    void unschedule(TimerId id);
    void transmit(SimRuntime& from, const std::string& to, Bytes frame);

    crypto::DeterministicRng rng_;
    std::uint64_t seed_;
    Time now_ = 0;
    std::uint64_t seq_ = 0;
    Duration latency_min_ = ms(1);
    Duration latency_max_ = ms(5);
    std::map<Key, Event> queue_;
    std::map<TimerId, Key> timers_;
    std::map<std::string, std::unique_ptr<SimRuntime>> nodes_;
};

}  // namespace zephyr::net
