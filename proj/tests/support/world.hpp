#pragma once

#include <gtest/gtest.h>

#include "zephyr/sim/world.hpp"

namespace zephyr::test_support {

/// Small network with no client traffic; tests drive submissions by hand
/// through client0's RPC endpoint.
inline sim::SimConfig quiet_config(std::uint64_t seed, std::size_t mixers = 3) {
    sim::SimConfig c;
    c.mixers = mixers;
    c.info_nodes = 2;
    c.mailboxes = 2;
    c.clients = 1;
    c.rounds = 3;
    c.messages_per_client = 0;
    c.seed = seed;
    return c;
}

inline bool run_to_open(sim::World& w, std::uint64_t round) {
    return w.run_until([&] { return w.rounds_opened() >= round; }, w.now() + net::seconds(300));
}

/// Calls `op` on `endpoint` from `from` and runs the network until the answer arrives.
inline net::Response call(sim::World& w, sim::SimNode& from, const std::string& endpoint, net::Opcode op,
                          Bytes payload) {
    std::optional<net::Response> out;
    from.rpc->call(endpoint, op, std::move(payload), net::seconds(2), [&](net::Response r) { out = std::move(r); });
    w.run_until([&] { return out.has_value(); }, w.now() + net::seconds(5));
    return out ? *out : net::Response::failure(Errc::Timeout, "no answer");
}

}  // namespace zephyr::test_support
