#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "live_config.hpp"
#include "zephyr/client.hpp"
#include "zephyr/coordinator.hpp"
#include "zephyr/dht.hpp"
#include "zephyr/info_node.hpp"
#include "zephyr/mailbox.hpp"
#include "zephyr/mixer.hpp"
#include "zephyr/net/live.hpp"
#include "zephyr/pkg.hpp"
#include "zephyr/sim/scenarios.hpp"
#include "zephyr/sim/world.hpp"

using namespace zephyr;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

std::unique_ptr<crypto::Rng> make_rng(std::optional<std::uint64_t> seed, std::string_view label) {
    if (seed) return std::make_unique<crypto::DeterministicRng>(*seed, label);
    return std::make_unique<crypto::OsRng>();
}

std::string escape(ByteView b) {
    std::string out;
    for (auto c : b) {
        if (c == '\\') out += "\\\\";
        else if (c == '\n') out += "\\n";
        else if (c == '\t') out += "\\t";
        else if (c < 0x20 || c == 0x7f) {
            char buf[5];
            std::snprintf(buf, sizeof(buf), "\\x%02x", c);
            out += buf;
        } else {
            out += static_cast<char>(c);
        }
    }
    return out;
}

Bytes read_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::Io, "cannot read " + path);
    return Bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_binary(const std::filesystem::path& path, ByteView data) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
        if (!out) throw Error(Errc::Io, "cannot write " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

/// One live process: event loop, runtime and RPC endpoint.
struct LiveHost {
    net::LiveLoop loop;
    std::unique_ptr<net::LiveRuntime> rt;
    std::unique_ptr<net::Rpc> rpc;

    LiveHost(const std::string& listen, std::unique_ptr<crypto::Rng> rng, NodeId id, bool verbose) {
        rt = loop.add_node(listen, std::move(rng));
        rt->on_trace = [this, verbose](std::string_view ev) {
            if (!verbose && ev.starts_with("peel ")) return;
            std::cerr << "[" << loop.now() / 1000 << " ms] " << ev << "\n";
        };
        rpc = std::make_unique<net::Rpc>(*rt, id);
    }

    void serve() {
        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);
        std::cerr << "listening on " << rt->endpoint() << " as " << rpc->self().hex() << "\n";
        while (!g_stop) loop.run_until([] { return g_stop.load(); }, net::seconds(1));
    }

    /// Drives the loop until `done` or timeout; false on timeout.
    bool wait(const std::function<bool()>& done, net::Duration timeout) { return loop.run_until(done, timeout); }
};

enum class JoinState { Fresh, Retrying, Joined };

/// Joins through the seeds, retrying until one answers; afterwards refreshes the
/// routing table periodically so early joiners learn about later ones.
void join_dht(dht::Dht& d, net::Runtime& rt, const cli::LiveConfig& c, JoinState state = JoinState::Fresh) {
    d.bootstrap(c.dht_seeds, [&d, &rt, &c, state](bool ok) {
        JoinState next = state;
        if (ok && state != JoinState::Joined) {
            if (state == JoinState::Retrying) std::cerr << "joined the DHT\n";
            next = JoinState::Joined;
        } else if (!ok && state == JoinState::Fresh) {
            std::cerr << "warning: no DHT seed reachable yet; retrying\n";
            next = JoinState::Retrying;
        }
        const auto delay = next == JoinState::Joined ? net::seconds(15) : net::seconds(1);
        rt.after(delay, [&d, &rt, &c, next] { join_dht(d, rt, c, next); });
    });
}

int run_daemon(const std::string& role, const std::string& config_path, bool in_memory) {
    const auto cfg = cli::load_live_config(config_path);
    if (cfg.listen.empty()) throw Error(Errc::ConfigInvalid, "listen is required");
    crypto::OsRng os;
    const auto key = cli::load_or_create_key(cfg.key_file, os);
    LiveHost host(cfg.listen, std::make_unique<crypto::OsRng>(), NodeId::from_public_key(key.public_key()),
                  cfg.verbose);
    auto& rpc = *host.rpc;

    if (role == "coordinator") {
        dht::Dht d(rpc);
        join_dht(d, *host.rt, cfg);
        if (cfg.mixers.empty() || cfg.info_nodes.empty() || cfg.mailbox_servers.empty() || cfg.pkg.empty())
            throw Error(Errc::ConfigInvalid, "coordinator needs mixers, info_nodes, mailbox_servers and pkg");
        coordinator::Coordinator coord(rpc, &d, key, cfg.plan(key.public_key()));
        std::cerr << "coordinator public key " << to_hex(key.public_key()) << "\n";
        coord.start(1);
        host.serve();
        return 0;
    }
    Authority authority(cli::load_public_key(cfg.coordinator_key_file));
    if (role == "mixer") {
        dht::Dht d(rpc);
        join_dht(d, *host.rt, cfg);
        mixer::MixerConfig mc;
        mc.info_nodes = cfg.info_nodes;
        mc.substitute_timings = cfg.plan(authority.pinned());
        mixer::Mixer m(rpc, d, authority, key, mc);
        host.serve();
    } else if (role == "info") {
        dht::Dht d(rpc);
        join_dht(d, *host.rt, cfg);
        info::InfoNode node(rpc, d, authority);
        host.serve();
    } else if (role == "pkg") {
        pkg::FileOutbox outbox(cfg.outbox_dir);
        pkg::PkgCore core(pkg::PkgConfig{}, host.rt->rng(), outbox);
        pkg::PkgServer server(rpc, authority, core);
        host.serve();
    } else if (role == "mailbox") {
        std::unique_ptr<mailbox::MailboxStore> store;
        if (in_memory) store = std::make_unique<mailbox::MemoryStore>();
        else store = std::make_unique<mailbox::LogStore>(cfg.journal);
        mailbox::MailboxServer server(rpc, authority, *store);
        host.serve();
    }
    return 0;
}

// ---------------------------------------------------------------------------

struct ClientRun {
    cli::LiveConfig cfg;
    std::unique_ptr<LiveHost> host;
    std::unique_ptr<client::Client> client;

    ClientRun(const std::string& config_path, std::optional<std::uint64_t> seed) : cfg(cli::load_live_config(config_path)) {
        if (cfg.identity.empty()) throw Error(Errc::ConfigInvalid, "identity is required for the client");
        if (cfg.session_file.empty()) cfg.session_file = cfg.identity + ".session";
        auto rng = make_rng(seed, "client:" + cfg.identity);
        const NodeId id = NodeId::from_public_key(rng->bytes(32));
        host = std::make_unique<LiveHost>(cfg.listen.empty() ? "127.0.0.1:0" : cfg.listen, std::move(rng), id,
                                          cfg.verbose);
        client::ClientConfig cc;
        cc.identity = cfg.identity;
        cc.info_nodes = cfg.info_nodes;
        cc.pinned = cli::load_public_key(cfg.coordinator_key_file);
        const auto outbox = cfg.outbox_dir;
        client = std::make_unique<client::Client>(
            *host->rpc, cc, [outbox](const std::string& who) { return pkg::FileOutbox::last_code(outbox, who); });
        if (std::filesystem::exists(cfg.session_file)) {
            try {
                client->install(client::deserialize_session(read_binary(cfg.session_file.string())));
            } catch (const MalformedError& e) {
                std::cerr << "warning: ignoring unreadable session file: " << e.what() << "\n";
            }
        }
    }

    template <typename T>
    T await(std::function<void(std::function<void(Result<T>)>)> op, net::Duration timeout) {
        std::optional<Result<T>> out;
        op([&](Result<T> r) { out = std::move(r); });
        if (!host->wait([&] { return out.has_value(); }, timeout)) throw Error(Errc::Timeout, "no answer in time");
        if (!out->ok()) throw Error(out->error, out->message);
        return std::move(*out->value);
    }

    info::KeyBundle latest() {
        return await<info::KeyBundle>([&](auto cb) { client->fetch_bundle(cb); }, net::seconds(10));
    }

    /// Latest bundle, waiting up to `patience` for a first round to open and be published.
    info::KeyBundle await_round(net::Duration patience = net::seconds(60)) {
        const net::Time give_up = host->loop.now() + patience;
        while (true) {
            try {
                return latest();
            } catch (const Error& e) {
                const bool transient = e.code() == Errc::UnknownRound || e.code() == Errc::IncompleteBundle ||
                                       e.code() == Errc::Timeout || e.code() == Errc::Unreachable;
                if (!transient || host->loop.now() > give_up) throw;
            }
            host->wait([] { return false; }, net::ms(500));
        }
    }

    void enroll() {
        await_round();
        await<bool>([&](auto cb) { client->enroll(cb); }, net::seconds(30));
        write_binary(cfg.session_file, client::serialize(*client->session()));
    }

    void ensure_current() {
        const auto b = await_round();
        if (!client->session() || client->session()->round < b.round) enroll();
    }
};

int client_enroll(const std::string& config, std::optional<std::uint64_t> seed) {
    ClientRun run(config, seed);
    run.enroll();
    const auto& s = *run.client->session();
    std::cout << "enrolled identity=" << s.identity << " round=" << s.round << " mailbox=" << s.mailbox_index << "\n";
    return 0;
}

int client_send(const std::string& config, std::optional<std::uint64_t> seed, const std::string& to,
                const std::string& message_file) {
    ClientRun run(config, seed);
    const Bytes message = read_binary(message_file);
    if (message.size() > envelope::kMaxMessageSize)
        throw Error(Errc::PayloadTooLong, "message exceeds " + std::to_string(envelope::kMaxMessageSize) + " bytes");
    run.ensure_current();
    const auto receipt = run.await<client::SendReceipt>(
        [&](auto cb) { run.client->send(to, message, cb); }, net::seconds(10));
    std::cout << "sent round=" << run.client->session()->round << " route_length=" << receipt.route_length
              << " padded_size=" << receipt.padded_size << "\n";
    return 0;
}

int client_fetch(const std::string& config, std::optional<std::uint64_t> seed) {
    ClientRun run(config, seed);
    if (!run.client->session()) run.enroll();
    const client::ClientSession session = *run.client->session();
    const auto duration = static_cast<net::Duration>(session.bundle.state.directory.round_duration);
    const net::Time give_up = run.host->loop.now() + 3 * duration + net::seconds(120);
    // The mailbox for a round is complete once the next round opens.
    while (true) {
        const auto b = run.await_round(3 * duration + net::seconds(120));
        if (b.round > session.round) break;
        if (run.host->loop.now() > give_up) throw Error(Errc::Timeout, "next round never opened");
        run.host->wait([] { return false; }, net::ms(500));
    }
    const auto got = run.await<std::vector<client::Delivered>>(
        [&](auto cb) { run.client->fetch_round(session, cb); }, net::seconds(30));
    for (const auto& d : got) std::cout << "round=" << d.round << " message=" << escape(d.plaintext) << "\n";
    std::cout << "fetched round=" << session.round << " count=" << got.size() << "\n";
    std::filesystem::remove(run.cfg.session_file);
    return 0;
}

// ---------------------------------------------------------------------------

int sim_run(const std::optional<std::string>& config_path, std::optional<std::uint64_t> seed,
            const std::optional<std::string>& csv_path) {
    sim::SimConfig cfg = config_path ? sim::load_config(*config_path) : sim::SimConfig{};
    if (seed) cfg.seed = *seed;
    const auto rep = sim::run_sim(cfg);
    const std::string csv = sim::to_csv(rep.rows);
    if (csv_path) {
        std::ofstream out(*csv_path, std::ios::binary);
        out << csv;
        if (!out) throw Error(Errc::Io, "cannot write " + *csv_path);
        std::cout << rep.summary;
    } else {
        std::cout << csv;
        std::cerr << rep.summary;
    }
    return rep.ok() ? 0 : 1;
}

int sim_scenario(const std::string& name, std::uint64_t seed) {
    const auto r = sim::run_scenario(name, seed);
    for (const auto& c : r.checks) std::cout << (c.passed ? "PASS " : "FAIL ") << c.description << "\n";
    if (!r.passed()) {
        std::cout << "scenario " << name << " failed; last events:\n";
        for (const auto& line : r.trace_tail) std::cout << "  " << line << "\n";
    }
    std::cout << "scenario " << name << (r.passed() ? " passed" : " failed") << "\n";
    return r.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"zephyr: metadata-private messaging over a mixnet with identity-based encryption"};
    app.require_subcommand(1);

    std::string config;
    bool in_memory = false;
    for (const char* role : {"mixer", "info", "pkg", "mailbox", "coordinator"}) {
        auto* sub = app.add_subcommand(role, std::string("run a ") + role + " daemon");
        sub->add_option("--config", config, "node config (JSON)")->required()->check(CLI::ExistingFile);
        if (std::string(role) == "mailbox") sub->add_flag("--in-memory", in_memory, "keep mail in memory only");
        sub->callback([&, role] { std::exit(run_daemon(role, config, in_memory)); });
    }

    auto* client = app.add_subcommand("client", "user commands");
    client->require_subcommand(1);
    std::optional<std::uint64_t> seed;
    std::string to, message_file;
    auto* enroll = client->add_subcommand("enroll", "authenticate with the PKG for the current round");
    auto* send = client->add_subcommand("send", "send one message");
    auto* fetch = client->add_subcommand("fetch", "wait for the round to finish and print received messages");
    for (auto* s : {enroll, send, fetch}) {
        s->add_option("--config", config, "client config (JSON)")->required()->check(CLI::ExistingFile);
        s->add_option("--seed", seed, "deterministic randomness (testing)");
    }
    send->add_option("--to", to, "recipient email address")->required();
    send->add_option("--message-file", message_file, "file holding the message")->required()->check(CLI::ExistingFile);
    enroll->callback([&] { std::exit(client_enroll(config, seed)); });
    send->callback([&] { std::exit(client_send(config, seed, to, message_file)); });
    fetch->callback([&] { std::exit(client_fetch(config, seed)); });

    auto* simc = app.add_subcommand("sim", "deterministic in-process simulation");
    std::optional<std::string> sim_config, csv;
    std::optional<std::uint64_t> sim_seed;
    simc->add_option("--config", sim_config, "simulation config (JSON)")->check(CLI::ExistingFile);
    simc->add_option("--seed", sim_seed, "override the configured seed");
    simc->add_option("--csv", csv, "write metrics CSV here instead of stdout");
    auto* scen = simc->add_subcommand("scenario", "run a scripted scenario with assertions");
    std::string scen_name;
    scen->add_option("name", scen_name, "scenario")->required()->check(CLI::IsMember(sim::scenario_names()));
    scen->callback([&] { std::exit(sim_scenario(scen_name, sim_seed.value_or(1))); });
    simc->final_callback([&] {
        if (scen->parsed()) return;
        std::exit(sim_run(sim_config, sim_seed, csv));
    });

    try {
        CLI11_PARSE(app, argc, argv);
    } catch (const Error& e) {
        std::cerr << "error: " << errc_name(e.code()) << ": " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
