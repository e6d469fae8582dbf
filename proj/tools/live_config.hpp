#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "zephyr/coordinator.hpp"
#include "zephyr/crypto/sign.hpp"

namespace zephyr::cli {

/// Settings for one live process. A file may name a shared "network" file whose
/// keys it inherits; keys in the node's own file win.
struct LiveConfig {
    std::string listen;
    std::filesystem::path key_file;
    std::filesystem::path coordinator_key_file;  // hex public key of the coordinator
    std::vector<std::string> dht_seeds;
    std::vector<std::string> mixers;
    std::vector<std::string> info_nodes;
    std::vector<std::string> mailbox_servers;
    std::string pkg;
    std::uint32_t mailbox_count = 16;
    net::Duration round_duration = net::seconds(10);
    std::filesystem::path outbox_dir = "outbox";
    std::filesystem::path journal = "mailbox.journal";
    std::string identity;
    std::filesystem::path session_file;
    bool verbose = false;

    coordinator::Plan plan(const crypto::SignPublicKey& coordinator_key) const;
};

LiveConfig parse_live_config(const std::string& json_text, const std::filesystem::path& base_dir);
LiveConfig load_live_config(const std::filesystem::path& path);

/// Reads the 32-byte seed (hex) at `path`, creating it and `path`.pub when absent.
crypto::SigningKey load_or_create_key(const std::filesystem::path& path, crypto::Rng& rng);
crypto::SignPublicKey load_public_key(const std::filesystem::path& path);

}  // namespace zephyr::cli
