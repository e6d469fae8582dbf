#include "zephyr/pkg.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>

#include "zephyr/envelope.hpp"
#include "zephyr/info_node.hpp"
#include "zephyr/wire.hpp"

namespace zephyr::pkg {

namespace {

constexpr std::size_t kMaxIdentity = 254;
constexpr std::string_view kCodePrefix = "zephyr authentication code: ";

std::string file_name_for(const std::string& address) {
    std::string out;
    for (char c : address) {
        const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '@' || c == '.' || c == '_' || c == '-' ||
                        c == '+';
        out += ok ? c : '_';
    }
    return out + ".txt";
}

}  // namespace

void InMemoryEmail::send(const std::string& address, const std::string& body) {
    std::lock_guard lock(mu_);
    messages_.push_back({address, body});
}

std::vector<InMemoryEmail::Message> InMemoryEmail::messages() const {
    std::lock_guard lock(mu_);
    return messages_;
}

std::optional<std::string> InMemoryEmail::last_code(const std::string& address) const {
    std::lock_guard lock(mu_);
    for (auto it = messages_.rbegin(); it != messages_.rend(); ++it)
        if (it->address == address) return code_from_body(it->body);
    return std::nullopt;
}

FileOutbox::FileOutbox(std::filesystem::path dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }

void FileOutbox::send(const std::string& address, const std::string& body) {
    std::lock_guard lock(mu_);
    std::ofstream out(dir_ / file_name_for(address), std::ios::app);
    out << body << "\n";
    if (!out) throw Error(Errc::Io, "cannot write outbox for " + address);
}

std::optional<std::string> FileOutbox::last_code(const std::filesystem::path& dir, const std::string& address) {
    std::ifstream in(dir / file_name_for(address));
    std::optional<std::string> code;
    for (std::string line; std::getline(in, line);)
        if (auto c = code_from_body(line)) code = c;
    return code;
}

std::optional<std::string> code_from_body(const std::string& body) {
    const auto at = body.find(kCodePrefix);
    if (at == std::string::npos) return std::nullopt;
    const std::string code = body.substr(at + kCodePrefix.size(), 6);
    if (code.size() != 6) return std::nullopt;
    for (char c : code)
        if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
    return code;
}

bool valid_email(std::string_view a) {
    if (a.empty() || a.size() > kMaxIdentity) return false;
    const auto at = a.find('@');
    if (at == std::string_view::npos || at == 0 || a.find('@', at + 1) != std::string_view::npos) return false;
    const auto domain = a.substr(at + 1);
    if (domain.empty() || domain.front() == '.' || domain.back() == '.') return false;
    if (domain.find('.') == std::string_view::npos || domain.find("..") != std::string_view::npos) return false;
    for (char c : a)
        if (static_cast<unsigned char>(c) <= 0x20 || static_cast<unsigned char>(c) >= 0x7f) return false;
    return true;
}

PkgCore::PkgCore(PkgConfig config, crypto::Rng& rng, EmailTransport& email)
    : config_(config), rng_(rng), email_(email) {}

const crypto::MasterPublicKey& PkgCore::rotate_master(std::uint64_t round) {
    std::lock_guard lock(mu_);
    if (master_ && round < round_) throw Error(Errc::StaleRound, "master rotation cannot move backwards");
    if (master_ && round == round_) return master_->mpk;
    master_.reset();
    master_ = crypto::ibe_setup(rng_, config_.preset);
    params_ = envelope::serialize(master_->mpk);
    round_ = round;
    challenges_.clear();
    issued_this_round_.clear();
    return master_->mpk;
}

void PkgCore::begin_auth(std::string_view identity, std::int64_t now) {
    if (!valid_email(identity)) throw Error(Errc::InvalidEmail, "identity is not an email address");
    const std::string folded = crypto::fold_identity(identity);
    std::lock_guard lock(mu_);
    int& issued = issued_this_round_[folded];
    if (issued >= config_.max_challenges_per_round)
        throw Error(Errc::RateLimited, "too many challenges for this identity in this round");
    ++issued;
    char code[8];
    std::snprintf(code, sizeof(code), "%06u", static_cast<unsigned>(rng_.uniform(1000000)));
    challenges_[folded] = AuthChallenge{folded, code, now, 0, false};
    email_.send(folded, std::string(kCodePrefix) + code);
}

Enrollment PkgCore::complete_auth(std::string_view identity, std::string_view code, std::int64_t now) {
    const Error rejected(Errc::Rejected, "authentication rejected");
    if (!valid_email(identity)) throw rejected;
    const std::string folded = crypto::fold_identity(identity);
    std::lock_guard lock(mu_);
    auto it = challenges_.find(folded);
    if (it == challenges_.end() || !master_) throw rejected;
    AuthChallenge& ch = it->second;
    if (ch.dead || now - ch.issued_at > config_.code_ttl || ch.attempts >= config_.max_attempts) {
        ch.dead = true;
        throw rejected;
    }
    const bool match = code.size() == ch.code.size() && equal_ct(as_bytes(code), as_bytes(ch.code));
    if (!match) {
        if (++ch.attempts >= config_.max_attempts) ch.dead = true;
        throw rejected;
    }
    Enrollment out;
    out.round = round_;
    out.key = crypto::ibe_extract(*master_, folded);
    out.mpk = params_;
    challenges_.erase(it);
    return out;
}

const Bytes& PkgCore::serve_params() const {
    std::lock_guard lock(mu_);
    if (!master_) throw Error(Errc::UnknownRound, "master key not initialized");
    return params_;
}

const crypto::MasterPublicKey& PkgCore::mpk() const {
    std::lock_guard lock(mu_);
    if (!master_) throw Error(Errc::UnknownRound, "master key not initialized");
    return master_->mpk;
}

std::size_t PkgCore::challenge_count() const {
    std::lock_guard lock(mu_);
    return challenges_.size();
}

Bytes PkgCore::master_secret_bytes() const {
    std::lock_guard lock(mu_);
    if (!master_) return {};
    return master_->mpk.context().encode_scalar(master_->msk);
}

Bytes encode_begin_auth(std::string_view identity) {
    wire::Writer w;
    w.str(identity);
    return std::move(w).take();
}

Bytes encode_complete_auth(std::string_view identity, std::string_view code) {
    wire::Writer w;
    w.str(identity).str(code);
    return std::move(w).take();
}

Enrollment decode_enrollment(ByteView payload) {
    wire::Reader r(payload);
    Enrollment e;
    e.round = r.u64();
    e.key = envelope::deserialize_identity_key(r.bytes(64 * 1024));
    e.mpk = r.bytes(64 * 1024);
    r.finish();
    return e;
}

PkgServer::PkgServer(net::Rpc& rpc, Authority& authority, PkgCore& core)
    : rpc_(rpc), authority_(authority), core_(core) {
    rpc_.on(net::Opcode::BeginAuth, [this](const net::Request& req, net::Responder resp) {
        ++requests_;
        wire::Reader r(req.payload);
        const std::string identity = r.str(kMaxIdentity);
        r.finish();
        core_.begin_auth(identity, rpc_.runtime().now());
        resp.ok();
    });
    rpc_.on(net::Opcode::CompleteAuth, [this](const net::Request& req, net::Responder resp) {
        ++requests_;
        wire::Reader r(req.payload);
        const std::string identity = r.str(kMaxIdentity);
        const std::string code = r.str(16);
        r.finish();
        const Enrollment e = core_.complete_auth(identity, code, rpc_.runtime().now());
        wire::Writer w;
        w.u64(e.round).bytes(envelope::serialize(e.key)).bytes(e.mpk);
        resp.ok(std::move(w).take());
    });
    rpc_.on(net::Opcode::ServeParams, [this](const net::Request& req, net::Responder resp) {
        ++requests_;
        wire::Reader r(req.payload);
        const bool text = r.u8() != 0;
        r.finish();
        const Bytes& params = core_.serve_params();
        resp.ok(text ? to_bytes(base64_encode(params)) : params);
    });
    rpc_.on(net::Opcode::RotateMaster, [this](const net::Request& req, net::Responder resp) {
        const auto cmd = deserialize_command(req.payload);
        if (!authority_.verify(cmd, "rotate-master")) throw Error(Errc::NotCoordinator, "rotation not authorized");
        const auto& mpk = core_.rotate_master(cmd.round);
        wire::Writer w;
        w.u64(core_.round()).bytes(envelope::serialize(mpk));
        resp.ok(std::move(w).take());
    });
    rpc_.on(net::Opcode::OpenRound, [this](const net::Request& req, net::Responder resp) {
        const auto open = info::deserialize_open(req.payload);
        if (!authority_.accept(open.state)) throw Error(Errc::Rejected, "round state rejected");
        resp.ok();
    });
}

std::size_t PkgServer::memory_estimate() const {
    std::size_t n = sizeof(*this) + sizeof(PkgCore);
    n += core_.challenge_count() * (sizeof(AuthChallenge) + 64);
    if (core_.initialized()) n += 2 * core_.serve_params().size();
    return n;
}

}  // namespace zephyr::pkg
