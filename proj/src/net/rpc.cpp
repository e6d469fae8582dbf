#include "zephyr/net/rpc.hpp"

namespace zephyr::net {

void Responder::ok(Bytes payload) {
    if (!state_ || state_->done) return;
    state_->done = true;
    if (state_->notify) return;
    auto rpc = state_->rpc.lock();
    if (!rpc) return;
    Frame f;
    f.opcode = state_->opcode;
    f.kind = FrameKind::Response;
    f.request_id = state_->request_id;
    f.payload = std::move(payload);
    (*rpc)->send_frame(state_->to, std::move(f));
}

void Responder::fail(Errc code, std::string_view message) {
    if (!state_ || state_->done) return;
    state_->done = true;
    if (state_->notify) return;
    auto rpc = state_->rpc.lock();
    if (!rpc) return;
    Frame f;
    f.opcode = state_->opcode;
    f.kind = FrameKind::Error;
    f.request_id = state_->request_id;
    f.payload = encode_error(code, message);
    (*rpc)->send_frame(state_->to, std::move(f));
}

Rpc::Rpc(Runtime& rt, NodeId self) : rt_(rt), self_(self), alive_(std::make_shared<Rpc*>(this)) {
    rt_.set_receiver([this](Bytes raw) { deliver(std::move(raw)); });
}

Rpc::~Rpc() {
    rt_.set_receiver(nullptr);
    for (auto& [id, p] : pending_) rt_.cancel(p.timer);
}

void Rpc::on(Opcode op, Handler handler) { handlers_[op] = std::move(handler); }

void Rpc::send_frame(const std::string& to, Frame f) {
    f.sender = self_;
    f.reply_to = rt_.endpoint();
    rt_.send(to, encode_frame(f));
}

void Rpc::call(const std::string& endpoint, Opcode op, Bytes payload, Duration timeout, Callback cb) {
    const std::uint64_t id = next_id_++;
    const TimerId timer = rt_.after(timeout, [this, id] {
        auto it = pending_.find(id);
        if (it == pending_.end()) return;
        auto done = std::move(it->second.cb);
        pending_.erase(it);
        if (done) done(Response::failure(Errc::Timeout, "rpc timeout"));
    });
    pending_.emplace(id, Pending{std::move(cb), timer});
    Frame f;
    f.opcode = op;
    f.kind = FrameKind::Request;
    f.request_id = id;
    f.payload = std::move(payload);
    send_frame(endpoint, std::move(f));
}

void Rpc::notify(const std::string& endpoint, Opcode op, Bytes payload) {
    Frame f;
    f.opcode = op;
    f.kind = FrameKind::Notify;
    f.payload = std::move(payload);
    send_frame(endpoint, std::move(f));
}

void Rpc::reset() {
    for (auto& [id, p] : pending_) rt_.cancel(p.timer);
    pending_.clear();
}

void Rpc::deliver(Bytes raw) {
    Frame f;
    try {
        f = decode_frame(raw);
    } catch (const MalformedError&) {
        ++frames_rejected_;
        return;
    }
    ++frames_handled_;
    if (f.kind == FrameKind::Response || f.kind == FrameKind::Error) {
        auto it = pending_.find(f.request_id);
        if (it == pending_.end()) return;  // late reply after timeout
        auto cb = std::move(it->second.cb);
        rt_.cancel(it->second.timer);
        pending_.erase(it);
        Response resp;
        if (f.kind == FrameKind::Error) {
            try {
                auto [code, msg] = decode_error(f.payload);
                resp = Response::failure(code, std::move(msg));
            } catch (const MalformedError& e) {
                resp = Response::failure(Errc::MalformedInput, e.what());
            }
        } else {
            resp.payload = std::move(f.payload);
        }
        resp.sender = f.sender;
        if (cb) cb(std::move(resp));
        return;
    }

    if (on_peer_seen) on_peer_seen(f.opcode, f.sender, f.reply_to);
    Responder responder;
    responder.state_ = std::make_shared<Responder::State>(
        Responder::State{alive_, f.reply_to, f.opcode, f.request_id, f.kind == FrameKind::Notify});
    auto it = handlers_.find(f.opcode);
    if (it == handlers_.end()) {
        responder.fail(Errc::UnknownOpcode, opcode_name(f.opcode));
        return;
    }
    Request req{std::move(f.reply_to), f.sender, f.opcode, std::move(f.payload)};
    try {
        it->second(req, responder);
    } catch (const Error& e) {
        responder.fail(e.code(), e.what());
    }
}

}  // namespace zephyr::net
