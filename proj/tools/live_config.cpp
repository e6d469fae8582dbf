#include "live_config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "zephyr/crypto/hash.hpp"
#include "zephyr/net/live.hpp"

namespace zephyr::cli {

namespace {

using nlohmann::json;

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw Error(Errc::Io, "cannot read " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json parse_json(const std::string& text, const std::string& what) {
    try {
        auto j = json::parse(text);
        if (!j.is_object()) throw Error(Errc::ConfigInvalid, what + " must be a JSON object");
        return j;
    } catch (const json::exception& e) {
        throw Error(Errc::ConfigInvalid, what + " is not valid JSON: " + e.what());
    }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

}  // namespace

coordinator::Plan LiveConfig::plan(const crypto::SignPublicKey& coordinator_key) const {
    coordinator::Plan p;
    p.mixer_endpoints = mixers;
    p.info_nodes = info_nodes;
    p.mailbox_servers = mailbox_servers;
    p.pkg_endpoint = pkg;
    p.mailbox_count = mailbox_count;
    p.salt = crypto::hash256("zephyr-salt", {ByteView(coordinator_key)});
    p.round_duration = round_duration;
    return p;
}

LiveConfig parse_live_config(const std::string& text, const std::filesystem::path& base_dir) {
    json j = parse_json(text, "config");
    if (j.contains("network")) {
        const auto net_path = resolve(base_dir, j.at("network").get<std::string>());
        json shared = parse_json(read_file(net_path), net_path.string());
        shared.merge_patch(j);
        j = std::move(shared);
        j.erase("network");
    }
    static const std::vector<std::string> known = {
        "listen", "key_file", "coordinator_key_file", "dht_seeds", "mixers", "info_nodes", "mailbox_servers", "pkg",
        "mailbox_count", "round_duration_ms", "outbox_dir", "journal", "identity", "session_file", "verbose"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw Error(Errc::ConfigInvalid, "unknown config key: " + it.key());
    LiveConfig c;
    try {
        c.listen = j.value("listen", std::string{});
        if (j.contains("key_file")) c.key_file = resolve(base_dir, j["key_file"].get<std::string>());
        if (j.contains("coordinator_key_file"))
            c.coordinator_key_file = resolve(base_dir, j["coordinator_key_file"].get<std::string>());
        c.dht_seeds = j.value("dht_seeds", c.dht_seeds);
        c.mixers = j.value("mixers", c.mixers);
        c.info_nodes = j.value("info_nodes", c.info_nodes);
        c.mailbox_servers = j.value("mailbox_servers", c.mailbox_servers);
        c.pkg = j.value("pkg", c.pkg);
        c.mailbox_count = j.value("mailbox_count", c.mailbox_count);
        c.round_duration = net::ms(j.value("round_duration_ms", std::int64_t{10000}));
        c.outbox_dir = resolve(base_dir, j.value("outbox_dir", std::string("outbox")));
        c.journal = resolve(base_dir, j.value("journal", std::string("mailbox.journal")));
        c.identity = j.value("identity", std::string{});
        if (j.contains("session_file")) c.session_file = resolve(base_dir, j["session_file"].get<std::string>());
        c.verbose = j.value("verbose", false);
    } catch (const json::exception& e) {
        throw Error(Errc::ConfigInvalid, std::string("bad config value: ") + e.what());
    }
    for (const auto* list : {&c.mixers, &c.info_nodes, &c.mailbox_servers, &c.dht_seeds})
        for (const auto& ep : *list) net::split_endpoint(ep);
    if (!c.listen.empty()) net::split_endpoint(c.listen);
    if (c.mailbox_count == 0) throw Error(Errc::ConfigInvalid, "mailbox_count must be positive");
    if (c.round_duration <= 0) throw Error(Errc::ConfigInvalid, "round_duration_ms must be positive");
    return c;
}

LiveConfig load_live_config(const std::filesystem::path& path) {
    return parse_live_config(read_file(path), path.parent_path().empty() ? "." : path.parent_path());
}

crypto::SigningKey load_or_create_key(const std::filesystem::path& path, crypto::Rng& rng) {
    if (path.empty()) throw Error(Errc::ConfigInvalid, "key_file is required");
    if (std::filesystem::exists(path)) {
        std::string hex = read_file(path);
        while (!hex.empty() && std::isspace(static_cast<unsigned char>(hex.back()))) hex.pop_back();
        const Bytes seed = from_hex(hex);
        if (seed.size() != 32) throw Error(Errc::ConfigInvalid, "key file must hold 32 bytes of hex: " + path.string());
        ByteArray<32> s{};
        std::copy(seed.begin(), seed.end(), s.begin());
        return crypto::SigningKey::from_seed(s);
    }
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto key = crypto::SigningKey::generate(rng);
    {
        std::ofstream out(path);
        out << to_hex(key.seed()) << "\n";
        if (!out) throw Error(Errc::Io, "cannot write " + path.string());
    }
    std::filesystem::permissions(path, std::filesystem::perms::owner_read | std::filesystem::perms::owner_write);
    std::ofstream pub(path.string() + ".pub");
    pub << to_hex(key.public_key()) << "\n";
    return key;
}

crypto::SignPublicKey load_public_key(const std::filesystem::path& path) {
    if (path.empty()) throw Error(Errc::ConfigInvalid, "coordinator_key_file is required");
    std::string hex = read_file(path);
    while (!hex.empty() && std::isspace(static_cast<unsigned char>(hex.back()))) hex.pop_back();
    const Bytes b = from_hex(hex);
    crypto::SignPublicKey pk{};
    if (b.size() != pk.size()) throw Error(Errc::ConfigInvalid, "public key file must hold 32 bytes of hex");
    std::copy(b.begin(), b.end(), pk.begin());
    return pk;
}

}  // namespace zephyr::cli
