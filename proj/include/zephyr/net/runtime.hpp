#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

#include "zephyr/bytes.hpp"
#include "zephyr/crypto/rng.hpp"

namespace zephyr::net {

/// Microseconds; virtual in the simulator, steady-clock in live mode.
using Time = std::int64_t;
using Duration = std::int64_t;
using TimerId = std::uint64_t;

constexpr Duration ms(std::int64_t v) { return v * 1000; }
constexpr Duration seconds(std::int64_t v) { return v * 1000000; }

/// Everything a node may touch outside its own state: clock, timers, transport,
/// randomness. The simulator and the TCP loop are the two implementations.
class Runtime {
public:
    using Receiver = std::function<void(Bytes frame)>;

    virtual ~Runtime() = default;
    virtual Time now() const = 0;
    virtual TimerId after(Duration delay, std::function<void()> fn) = 0;
    virtual void cancel(TimerId id) = 0;
    /// Best-effort delivery of one frame; loss surfaces as RPC timeouts.
    virtual void send(const std::string& endpoint, Bytes frame) = 0;
    virtual void set_receiver(Receiver receiver) = 0;
    virtual const std::string& endpoint() const = 0;
    virtual crypto::Rng& rng() = 0;
    /// Instrumentation hook for ordering assertions.
    virtual void trace(std::string_view event) { (void)event; }
};

}  // namespace zephyr::net
