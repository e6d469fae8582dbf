#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "zephyr/net/frame.hpp"
#include "zephyr/net/runtime.hpp"

namespace zephyr::net {

struct Request {
    std::string from;  // reply endpoint
    NodeId sender;
    Opcode opcode;
    Bytes payload;
};

struct Response {
    std::optional<Errc> error;  // nullopt on success
    std::string message;
    Bytes payload;
    NodeId sender;

    bool ok() const { return !error.has_value(); }
    static Response failure(Errc code, std::string msg) { return Response{code, std::move(msg), {}, {}}; }
};

class Rpc;

/// One-shot reply handle; may be kept and completed later (asynchronous handlers).
class Responder {
public:
    Responder() = default;
    void ok(Bytes payload = {});
    void fail(Errc code, std::string_view message);
    bool pending() const { return state_ && !state_->done; }

private:
    friend class Rpc;
    struct State {
        std::weak_ptr<Rpc*> rpc;
        std::string to;
        Opcode opcode;
        std::uint64_t request_id;
        bool notify;
        bool done = false;
    };
    std::shared_ptr<State> state_;
};

/// Request/response multiplexer over a Runtime. Handlers that throw
/// zephyr::Error are answered with the error code; other exceptions propagate.
class Rpc {
public:
    using Handler = std::function<void(const Request&, Responder)>;
    using Callback = std::function<void(Response)>;

    Rpc(Runtime& rt, NodeId self);
    ~Rpc();
    Rpc(const Rpc&) = delete;
    Rpc& operator=(const Rpc&) = delete;

    void on(Opcode op, Handler handler);
    /// `cb` may be empty (fire and forget with delivery tracking).
    void call(const std::string& endpoint, Opcode op, Bytes payload, Duration timeout, Callback cb);
    void notify(const std::string& endpoint, Opcode op, Bytes payload);

    /// Drops every outstanding call without invoking callbacks (crash semantics).
    void reset();

    Runtime& runtime() { return rt_; }
    const NodeId& self() const { return self_; }
    std::uint64_t frames_handled() const { return frames_handled_; }
    std::uint64_t frames_rejected() const { return frames_rejected_; }

    /// Called for every request or notify before dispatch (routing-table upkeep).
    std::function<void(Opcode, const NodeId&, const std::string&)> on_peer_seen;

private:
    friend class Responder;
    void deliver(Bytes raw);
    void send_frame(const std::string& to, Frame f);

    struct Pending {
        Callback cb;
        TimerId timer;
    };

    Runtime& rt_;
    NodeId self_;
    std::shared_ptr<Rpc*> alive_;
    std::map<Opcode, Handler> handlers_;
    std::map<std::uint64_t, Pending> pending_;
    std::uint64_t next_id_ = 1;
    std::uint64_t frames_handled_ = 0;
    std::uint64_t frames_rejected_ = 0;
};

}  // namespace zephyr::net
