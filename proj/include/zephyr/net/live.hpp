#pragma once

#include <atomic>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "zephyr/crypto/rng.hpp"
#include "zephyr/net/runtime.hpp"

namespace zephyr::net {

class LiveRuntime;

/// Single-threaded poll() loop over TCP. Frames travel as u32 length || frame.
/// `post` is the only entry point safe to call from other threads.
class LiveLoop {
public:
    LiveLoop();
    ~LiveLoop();
    LiveLoop(const LiveLoop&) = delete;
    LiveLoop& operator=(const LiveLoop&) = delete;

    /// Binds a listening socket; port 0 picks an ephemeral port (see LiveRuntime::endpoint).
    std::unique_ptr<LiveRuntime> add_node(const std::string& listen_endpoint, std::unique_ptr<crypto::Rng> rng);

    void run();
    /// Runs until `done` holds or `timeout` elapses; returns done().
    bool run_until(const std::function<bool()>& done, Duration timeout);
    void stop();
    void post(std::function<void()> fn);
    Time now() const;

private:
    friend class LiveRuntime;
    struct Conn;
    struct Listener {
        int fd;
        LiveRuntime* owner;
    };

    TimerId add_timer(Time at, std::function<void()> fn);
    void cancel_timer(TimerId id);
    void enqueue(const std::string& endpoint, Bytes frame);
    void remove_node(LiveRuntime* rt);
    void poll_once(Duration max_wait);
    void run_timers();
    void close_conn(std::size_t index);

    std::map<std::pair<Time, TimerId>, std::function<void()>> timers_;
    std::map<TimerId, Time> timer_index_;
    TimerId next_timer_ = 1;
    std::vector<Listener> listeners_;
    std::vector<std::unique_ptr<Conn>> conns_;
    std::map<std::string, Conn*> outbound_;
    int wake_[2] = {-1, -1};
    std::mutex posted_mu_;
    std::vector<std::function<void()>> posted_;
    std::atomic<bool> stop_{false};
};

class LiveRuntime final : public Runtime {
public:
    ~LiveRuntime() override;
    Time now() const override { return loop_.now(); }
    TimerId after(Duration delay, std::function<void()> fn) override;
    void cancel(TimerId id) override { loop_.cancel_timer(id); }
    void send(const std::string& endpoint, Bytes frame) override { loop_.enqueue(endpoint, std::move(frame)); }
    void set_receiver(Receiver receiver) override { receiver_ = std::move(receiver); }
    const std::string& endpoint() const override { return endpoint_; }
    crypto::Rng& rng() override { return *rng_; }
    void trace(std::string_view event) override;
    LiveLoop& loop() { return loop_; }

    std::function<void(std::string_view)> on_trace;

private:
    friend class LiveLoop;
    LiveRuntime(LiveLoop& loop, std::string endpoint, std::unique_ptr<crypto::Rng> rng)
        : loop_(loop), endpoint_(std::move(endpoint)), rng_(std::move(rng)) {}

    LiveLoop& loop_;
    std::string endpoint_;
    std::unique_ptr<crypto::Rng> rng_;
    Receiver receiver_;
};

/// Splits "host:port"; throws Error(ConfigInvalid) on bad syntax.
std::pair<std::string, std::uint16_t> split_endpoint(const std::string& endpoint);

}  // namespace zephyr::net
