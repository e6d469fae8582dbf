#include "zephyr/client.hpp"

#include <algorithm>

#include "zephyr/mailbox.hpp"
#include "zephyr/mixer.hpp"
#include "zephyr/pkg.hpp"
#include "zephyr/wire.hpp"

namespace zephyr::client {

using net::Opcode;

namespace {

constexpr std::uint8_t kSessionVersion = 1;
constexpr std::size_t kMaxBundle = 1 << 20;

template <typename T>
Result<T> fail(Errc e, std::string msg) {
    return Result<T>::failure(e, std::move(msg));
}

template <typename T>
Result<T> fail(const net::Response& r) {
    return Result<T>::failure(*r.error, r.message);
}

}  // namespace

Bytes serialize(const ClientSession& s) {
    wire::Writer w;
    w.u8(kSessionVersion)
        .str(s.identity)
        .u64(s.round)
        .bytes(envelope::serialize(s.own_key))
        .bytes(info::serialize(s.bundle))
        .u32(s.mailbox_index)
        .raw(s.mailbox_id);
    return std::move(w).take();
}

ClientSession deserialize_session(ByteView b) {
    wire::Reader r(b);
    if (r.u8() != kSessionVersion) throw MalformedError(0, "unsupported session version");
    ClientSession s;
    s.identity = r.str(254);
    s.round = r.u64();
    s.own_key = envelope::deserialize_identity_key(r.bytes(64 * 1024));
    s.bundle = info::deserialize_bundle(r.bytes(kMaxBundle));
    s.mailbox_index = r.u32();
    s.mailbox_id = r.array<32>();
    r.finish();
    return s;
}

Result<bool> verify_bundle(Authority& authority, const info::KeyBundle& b) {
    const auto& dir = b.state.directory;
    if (b.round != b.state.round) return fail<bool>(Errc::Rejected, "bundle round does not match its state");
    if (digest_mpk(b.mpk) != b.state.mpk_digest) return fail<bool>(Errc::Rejected, "mpk digest mismatch");
    if (dir.mixers.empty()) return fail<bool>(Errc::NoMixers, "directory lists no mixers");
    if (b.records.size() != dir.mixers.size())
        return fail<bool>(Errc::IncompleteBundle, "bundle does not cover the directory");
    for (std::size_t i = 0; i < dir.mixers.size(); ++i) {
        const auto& rec = b.records[i];
        const auto& m = dir.mixers[i];
        if (rec.mixer_id != m.id || rec.round != b.round || rec.address != mixer_address(m.endpoint))
            return fail<bool>(Errc::Rejected, "bundle record does not match the directory");
    }
    if (!authority.accept(b.state)) return fail<bool>(Errc::Rejected, "round state not signed by the coordinator");
    return Result<bool>::success(true);
}

std::vector<std::size_t> choose_route(std::size_t mixers, std::size_t max_route, crypto::Rng& rng) {
    if (mixers == 0) throw Error(Errc::NoMixers, "no mixers available");
    const std::size_t top = std::min(max_route, mixers);
    const std::size_t len = top <= 1 ? 1 : 2 + static_cast<std::size_t>(rng.uniform(top - 1));
    auto perm = mixer::fisher_yates(mixers, rng);
    perm.resize(len);
    return perm;
}

Client::Client(net::Rpc& rpc, ClientConfig config, CodeSource codes)
    : rpc_(rpc),
      config_(std::move(config)),
      codes_(std::move(codes)),
      authority_(config_.pinned),
      alive_(std::make_shared<bool>(true)) {}

Client::~Client() { *alive_ = false; }

const std::string& Client::pick_info() {
    const auto& list = !config_.info_nodes.empty() || !session_ ? config_.info_nodes
                                                                : session_->bundle.state.directory.info_nodes;
    if (list.empty()) throw Error(Errc::ConfigInvalid, "no info nodes configured");
    return list[rpc_.runtime().rng().uniform(list.size())];
}

void Client::fetch_bundle(std::function<void(Result<info::KeyBundle>)> done) {
    auto alive = alive_;
    rpc_.call(pick_info(), Opcode::FetchBundle, info::encode_fetch_request(info::kLatestRound, 0),
              config_.call_timeout, [this, alive, done](net::Response r) {
                  if (!*alive) return;
                  if (!r.ok()) return done(fail<info::KeyBundle>(r));
                  try {
                      if (r.payload.empty() || r.payload[0] != 0)
                          return done(fail<info::KeyBundle>(Errc::UnknownRound, "no bundle returned"));
                      auto b = info::deserialize_bundle(ByteView(r.payload).subspan(1));
                      auto v = verify_bundle(authority_, b);
                      if (!v.ok()) return done(fail<info::KeyBundle>(v.error, v.message));
                      done(Result<info::KeyBundle>::success(std::move(b)));
                  } catch (const MalformedError& e) {
                      done(fail<info::KeyBundle>(Errc::MalformedInput, e.what()));
                  }
              });
}

void Client::enroll(std::function<void(Result<bool>)> done) {
    auto alive = alive_;
    fetch_bundle([this, alive, done](Result<info::KeyBundle> b) {
        if (!*alive) return;
        if (!b.ok()) return done(fail<bool>(b.error, b.message));
        begin_auth(done, std::move(*b.value));
    });
}

void Client::begin_auth(std::function<void(Result<bool>)> done, info::KeyBundle bundle) {
    auto alive = alive_;
    const std::string pkg = bundle.state.directory.pkg_endpoint;
    rpc_.call(pkg, Opcode::BeginAuth, pkg::encode_begin_auth(config_.identity), config_.call_timeout,
              [this, alive, done, bundle = std::move(bundle)](net::Response r) mutable {
                  if (!*alive) return;
                  if (!r.ok()) return done(fail<bool>(r));
                  await_code(done, std::move(bundle), 0);
              });
}

void Client::await_code(std::function<void(Result<bool>)> done, info::KeyBundle bundle, int attempt) {
    auto alive = alive_;
    const auto code = codes_ ? codes_(crypto::fold_identity(config_.identity)) : std::nullopt;
    if (!code) {
        if (attempt + 1 >= config_.code_attempts)
            return done(fail<bool>(Errc::Timeout, "authentication code never arrived"));
        rpc_.runtime().after(config_.code_poll, [this, alive, done, bundle = std::move(bundle), attempt]() mutable {
            if (*alive) await_code(done, std::move(bundle), attempt + 1);
        });
        return;
    }
    const std::string pkg = bundle.state.directory.pkg_endpoint;
    rpc_.call(pkg, Opcode::CompleteAuth, pkg::encode_complete_auth(config_.identity, *code), config_.call_timeout,
              [this, alive, done, bundle = std::move(bundle)](net::Response r) mutable {
                  if (!*alive) return;
                  if (!r.ok()) return done(fail<bool>(r));
                  try {
                      auto e = pkg::decode_enrollment(r.payload);
                      if (e.round != bundle.round || e.mpk != bundle.mpk)
                          return done(fail<bool>(Errc::WrongRound, "PKG answered for a different round"));
                      auto mpk = envelope::deserialize_mpk(e.mpk);
                      if (!crypto::ibe_verify_key(mpk, e.key))
                          return done(fail<bool>(Errc::Rejected, "issued key fails verification"));
                      ClientSession s;
                      s.identity = config_.identity;
                      s.round = bundle.round;
                      s.own_key = std::move(e.key);
                      const auto& dir = bundle.state.directory;
                      s.mailbox_index = mailbox_index(config_.identity, bundle.round, dir.salt, dir.mailbox_count);
                      s.mailbox_id = mailbox_id_for(s.mailbox_index, dir.salt);
                      s.bundle = std::move(bundle);
                      install(std::move(s));
                      done(Result<bool>::success(true));
                  } catch (const MalformedError& ex) {
                      done(fail<bool>(Errc::MalformedInput, ex.what()));
                  }
              });
}

void Client::install(ClientSession s) {
    mpk_ = envelope::deserialize_mpk(s.bundle.mpk);
    recipients_.clear();
    authority_.accept(s.bundle.state);
    session_ = std::move(s);
}

const crypto::IbeRecipient& Client::recipient_for(const std::string& identity) {
    const std::string folded = crypto::fold_identity(identity);
    auto it = recipients_.find(folded);
    if (it == recipients_.end()) it = recipients_.emplace(folded, crypto::ibe_precompute(*mpk_, folded)).first;
    return it->second;
}

void Client::send(const std::string& recipient, ByteView message, std::function<void(Result<SendReceipt>)> done) {
    if (message.size() > envelope::kMaxMessageSize)
        return done(fail<SendReceipt>(Errc::PayloadTooLong, "message exceeds the largest padding bucket"));
    if (!pkg::valid_email(recipient)) return done(fail<SendReceipt>(Errc::InvalidEmail, "recipient is not an email"));
    if (!session_) return done(fail<SendReceipt>(Errc::WrongRound, "not enrolled for any round"));
    const auto& b = session_->bundle;
    const auto& dir = b.state.directory;
    if (b.records.empty()) return done(fail<SendReceipt>(Errc::NoMixers, "no mixers in the bundle"));

    auto& rng = rpc_.runtime().rng();
    const Bytes padded = envelope::pad_message(message);
    const auto sealed = envelope::seal_to_recipient(recipient_for(recipient), padded, rng);
    const auto idx = mailbox_index(recipient, b.round, dir.salt, dir.mailbox_count);
    const auto mailbox = mailbox_address(dir, idx);
    std::vector<envelope::RouteHop> route;
    for (auto i : choose_route(b.records.size(), config_.max_route, rng))
        route.push_back({b.records[i].address, b.records[i].public_key});
    const auto packet = envelope::onion_wrap(route, mailbox, sealed, rng);

    SendReceipt receipt{route.size(), padded.size()};
    auto alive = alive_;
    rpc_.call(route.front().address.endpoint(), Opcode::Submit, mixer::encode_submit(b.round, packet),
              config_.call_timeout, [this, alive, done, receipt](net::Response r) {
                  if (!*alive) return;
                  if (!r.ok()) {
                      ++send_failures_;
                      return done(fail<SendReceipt>(r));
                  }
                  ++sent_;
                  done(Result<SendReceipt>::success(receipt));
              });
}

void Client::fetch_round(const ClientSession& s, std::function<void(Result<std::vector<Delivered>>)> done) {
    const auto addr = mailbox_address(s.bundle.state.directory, s.mailbox_index);
    auto alive = alive_;
    auto key = std::make_shared<crypto::IdentityPrivateKey>(s.own_key);
    const auto id = s.mailbox_id;
    const auto round = s.round;
    rpc_.call(addr.endpoint(), Opcode::FetchAll, mailbox::encode_fetch(id, round), config_.call_timeout,
              [alive, done, key, id, round](net::Response r) {
                  if (!*alive) return;
                  using R = Result<std::vector<Delivered>>;
                  if (!r.ok()) return done(R::failure(*r.error, r.message));
                  std::vector<mailbox::MailboxRecord> records;
                  try {
                      records = mailbox::decode_fetch_response(id, round, r.payload);
                  } catch (const MalformedError& e) {
                      return done(R::failure(Errc::MalformedInput, e.what()));
                  }
                  std::vector<Delivered> out;
                  for (const auto& rec : records) {
                      try {
                          auto opened = envelope::open_as_recipient(*key, envelope::deserialize_sealed(rec.blob));
                          if (opened) out.push_back({envelope::unpad_message(*opened), round});
                      } catch (const MalformedError&) {
                      }
                  }
                  done(R::success(std::move(out)));
              });
}

void Client::start() {
    if (running_) return;
    running_ = true;
    poll();
}

void Client::stop() {
    running_ = false;
    *alive_ = false;
    alive_ = std::make_shared<bool>(true);
    busy_ = false;
}

void Client::queue(std::string recipient, Bytes message) { outbox_.emplace_back(std::move(recipient), std::move(message)); }

void Client::poll() {
    auto alive = alive_;
    if (!running_) return;
    rpc_.runtime().after(config_.poll_interval, [this, alive] {
        if (*alive) poll();
    });
    if (busy_) return;
    const std::uint64_t have = session_ ? session_->round : 0;
    busy_ = true;
    rpc_.call(pick_info(), Opcode::FetchBundle, info::encode_fetch_request(info::kLatestRound, have),
              config_.call_timeout, [this, alive, have](net::Response r) {
                  if (!*alive) return;
                  busy_ = false;
                  if (!r.ok() || r.payload.empty() || r.payload[0] != 0) return;
                  try {
                      auto b = info::deserialize_bundle(ByteView(r.payload).subspan(1));
                      if (b.round <= have || !verify_bundle(authority_, b).ok()) return;
                      on_round(std::move(b));
                  } catch (const MalformedError&) {
                  }
              });
}

void Client::on_round(info::KeyBundle bundle) {
    busy_ = true;
    auto alive = alive_;
    auto next = [this, alive, bundle = std::move(bundle)]() mutable {
        begin_auth(
            [this, alive](Result<bool> r) {
                if (!*alive) return;
                busy_ = false;
                if (!r.ok()) {
                    rpc_.runtime().trace("client-enroll-failed " + config_.identity + " " + r.message);
                    return;
                }
                if (on_enrolled) on_enrolled(session_->round);
                flush();
            },
            std::move(bundle));
    };
    if (!session_) return next();
    fetch_round(*session_, [this, alive, next, round = session_->round](Result<std::vector<Delivered>> r) mutable {
        if (!*alive) return;
        if (r.ok()) {
            for (const auto& d : *r.value) inbox_.push_back(d);
            if (on_fetched) on_fetched(round, *r.value);
        } else {
            rpc_.runtime().trace("client-fetch-failed " + config_.identity + " " + r.message);
        }
        next();
    });
}

void Client::flush() {
    while (!outbox_.empty()) {
        auto [to, msg] = std::move(outbox_.front());
        outbox_.pop_front();
        send(to, msg, [this](Result<SendReceipt> r) {
            if (!r.ok()) rpc_.runtime().trace("client-send-failed " + config_.identity + " " + r.message);
        });
    }
}

std::size_t Client::memory_estimate() const {
    std::size_t n = sizeof(*this) + recipients_.size() * 512;
    if (session_) n += serialize(*session_).size();
    for (const auto& d : inbox_) n += d.plaintext.size() + sizeof(Delivered);
    for (const auto& [to, m] : outbox_) n += to.size() + m.size();
    return n;
}

}  // namespace zephyr::client
