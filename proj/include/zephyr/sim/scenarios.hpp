#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace zephyr::sim {

struct Check {
    bool passed = false;
    std::string description;
};

struct ScenarioResult {
    std::string name;
    std::vector<Check> checks;
    /// Digest of the full event trace; equal digests mean identical runs.
    std::string fingerprint;
    std::vector<std::string> trace_tail;

    bool passed() const;
};

std::vector<std::string> scenario_names();
/// Throws ConfigInvalid for an unknown name.
ScenarioResult run_scenario(const std::string& name, std::uint64_t seed = 1);

ScenarioResult barrier_scenario(std::uint64_t seed);
ScenarioResult failover_scenario(std::uint64_t seed);
ScenarioResult rotation_scenario(std::uint64_t seed);
ScenarioResult unlinkability_scenario(std::uint64_t seed);
ScenarioResult dos_routing_scenario(std::uint64_t seed);

}  // namespace zephyr::sim
