#include "zephyr/net/live.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>

#include "zephyr/error.hpp"
#include "zephyr/net/frame.hpp"

namespace zephyr::net {

namespace {

void set_nonblocking(int fd) {
    const int flags = ::fcntl(fd, F_GETFL, 0);
    ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

sockaddr_in resolve(const std::string& host, std::uint16_t port) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) == 1) return addr;
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || !res)
        throw Error(Errc::Unreachable, "cannot resolve " + host);
    addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
    ::freeaddrinfo(res);
    return addr;
}

}  // namespace

std::pair<std::string, std::uint16_t> split_endpoint(const std::string& endpoint) {
    const auto colon = endpoint.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == endpoint.size())
        throw Error(Errc::ConfigInvalid, "endpoint must be host:port: " + endpoint);
    const std::string port_str = endpoint.substr(colon + 1);
    unsigned long port = 0;
    for (char c : port_str) {
        if (c < '0' || c > '9') throw Error(Errc::ConfigInvalid, "bad port in " + endpoint);
        port = port * 10 + static_cast<unsigned long>(c - '0');
        if (port > 65535) throw Error(Errc::ConfigInvalid, "bad port in " + endpoint);
    }
    return {endpoint.substr(0, colon), static_cast<std::uint16_t>(port)};
}

struct LiveLoop::Conn {
    int fd = -1;
    bool outbound = false;
    bool connecting = false;
    std::string peer;
    LiveRuntime* owner = nullptr;
    FrameAssembler rbuf;
    Bytes wbuf;
};

LiveLoop::LiveLoop() {
    if (::pipe(wake_) != 0) throw Error(Errc::Io, "pipe");
    set_nonblocking(wake_[0]);
    set_nonblocking(wake_[1]);
}

LiveLoop::~LiveLoop() {
    for (auto& c : conns_) ::close(c->fd);
    for (auto& l : listeners_) ::close(l.fd);
    ::close(wake_[0]);
    ::close(wake_[1]);
}

Time LiveLoop::now() const {
    using namespace std::chrono;
    return duration_cast<microseconds>(steady_clock::now().time_since_epoch()).count();
}

std::unique_ptr<LiveRuntime> LiveLoop::add_node(const std::string& listen_endpoint, std::unique_ptr<crypto::Rng> rng) {
    auto [host, port] = split_endpoint(listen_endpoint);
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw Error(Errc::Io, "socket");
    const int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr = resolve(host, port);
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 || ::listen(fd, 128) != 0) {
        ::close(fd);
        throw Error(Errc::Io, "cannot listen on " + listen_endpoint + ": " + std::strerror(errno));
    }
    socklen_t len = sizeof(addr);
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    set_nonblocking(fd);
    const std::string bound = host + ":" + std::to_string(ntohs(addr.sin_port));
    auto rt = std::unique_ptr<LiveRuntime>(new LiveRuntime(*this, bound, std::move(rng)));
    listeners_.push_back(Listener{fd, rt.get()});
    return rt;
}

void LiveLoop::remove_node(LiveRuntime* rt) {
    for (std::size_t i = 0; i < listeners_.size();) {
        if (listeners_[i].owner == rt) {
            ::close(listeners_[i].fd);
            listeners_.erase(listeners_.begin() + static_cast<std::ptrdiff_t>(i));
        } else {
            ++i;
        }
    }
    for (std::size_t i = conns_.size(); i-- > 0;)
        if (conns_[i]->owner == rt) close_conn(i);
}

TimerId LiveLoop::add_timer(Time at, std::function<void()> fn) {
    const TimerId id = next_timer_++;
    timers_.emplace(std::make_pair(at, id), std::move(fn));
    timer_index_.emplace(id, at);
    return id;
}

void LiveLoop::cancel_timer(TimerId id) {
    auto it = timer_index_.find(id);
    if (it == timer_index_.end()) return;
    timers_.erase({it->second, id});
    timer_index_.erase(it);
}

void LiveLoop::post(std::function<void()> fn) {
    {
        std::lock_guard lock(posted_mu_);
        posted_.push_back(std::move(fn));
    }
    const char b = 1;
    (void)!::write(wake_[1], &b, 1);
}

void LiveLoop::stop() {
    stop_ = true;
    const char b = 1;
    (void)!::write(wake_[1], &b, 1);
}

void LiveLoop::enqueue(const std::string& endpoint, Bytes frame) {
    Conn* conn = nullptr;
    if (auto it = outbound_.find(endpoint); it != outbound_.end()) {
        conn = it->second;
    } else {
        sockaddr_in addr;
        try {
            auto [host, port] = split_endpoint(endpoint);
            addr = resolve(host, port);
        } catch (const Error&) {
            return;
        }
        const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd < 0) return;
        set_nonblocking(fd);
        const int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
        const int rc = ::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
        if (rc != 0 && errno != EINPROGRESS) {
            ::close(fd);
            return;
        }
        auto c = std::make_unique<Conn>();
        c->fd = fd;
        c->outbound = true;
        c->connecting = rc != 0;
        c->peer = endpoint;
        conn = c.get();
        conns_.push_back(std::move(c));
        outbound_[endpoint] = conn;
    }
    append(conn->wbuf, length_prefixed(frame));
}

void LiveLoop::close_conn(std::size_t index) {
    Conn* c = conns_[index].get();
    if (c->outbound) outbound_.erase(c->peer);
    ::close(c->fd);
    conns_.erase(conns_.begin() + static_cast<std::ptrdiff_t>(index));
}

void LiveLoop::run_timers() {
    const Time t = now();
    while (!timers_.empty() && timers_.begin()->first.first <= t) {
        auto it = timers_.begin();
        auto fn = std::move(it->second);
        timer_index_.erase(it->first.second);
        timers_.erase(it);
        fn();
    }
}

void LiveLoop::poll_once(Duration max_wait) {
    std::vector<pollfd> fds;
    fds.push_back(pollfd{wake_[0], POLLIN, 0});
    for (auto& l : listeners_) fds.push_back(pollfd{l.fd, POLLIN, 0});
    const std::size_t conn_base = fds.size();
    for (auto& c : conns_) {
        short ev = POLLIN;
        if (c->connecting || !c->wbuf.empty()) ev |= POLLOUT;
        fds.push_back(pollfd{c->fd, ev, 0});
    }
    Duration wait = max_wait;
    if (!timers_.empty()) wait = std::min(wait, std::max<Duration>(0, timers_.begin()->first.first - now()));
    const int timeout_ms = static_cast<int>((wait + 999) / 1000);
    const int rc = ::poll(fds.data(), fds.size(), timeout_ms);
    if (rc < 0) {
        if (errno == EINTR) return;
        throw Error(Errc::Io, std::string("poll: ") + std::strerror(errno));
    }

    if (fds[0].revents & POLLIN) {
        char buf[64];
        while (::read(wake_[0], buf, sizeof(buf)) > 0) {
        }
        std::vector<std::function<void()>> work;
        {
            std::lock_guard lock(posted_mu_);
            work.swap(posted_);
        }
        for (auto& fn : work) fn();
    }

    const std::size_t nconns = fds.size() - conn_base;
    std::vector<Conn*> snapshot;
    for (std::size_t i = 0; i < nconns && i < conns_.size(); ++i) snapshot.push_back(conns_[i].get());

    for (std::size_t i = 1; i < conn_base; ++i) {
        if (!(fds[i].revents & POLLIN)) continue;
        LiveRuntime* owner = nullptr;
        for (auto& l : listeners_)
            if (l.fd == fds[i].fd) owner = l.owner;
        if (!owner) continue;
        while (true) {
            const int cfd = ::accept(fds[i].fd, nullptr, nullptr);
            if (cfd < 0) break;
            set_nonblocking(cfd);
            auto c = std::make_unique<Conn>();
            c->fd = cfd;
            c->owner = owner;
            conns_.push_back(std::move(c));
        }
    }

    std::vector<Conn*> dead;
    for (std::size_t i = 0; i < snapshot.size(); ++i) {
        Conn* c = snapshot[i];
        const short re = fds[conn_base + i].revents;
        if (!re) continue;
        bool broken = (re & (POLLERR | POLLNVAL)) != 0;
        if (!broken && c->connecting && (re & (POLLOUT | POLLHUP))) {
            int err = 0;
            socklen_t len = sizeof(err);
            ::getsockopt(c->fd, SOL_SOCKET, SO_ERROR, &err, &len);
            if (err != 0) broken = true;
            else c->connecting = false;
        }
        if (!broken && !c->connecting && (re & POLLOUT) && !c->wbuf.empty()) {
            const ssize_t n = ::send(c->fd, c->wbuf.data(), c->wbuf.size(), MSG_NOSIGNAL);
            if (n > 0) c->wbuf.erase(c->wbuf.begin(), c->wbuf.begin() + n);
            else if (n < 0 && errno != EAGAIN && errno != EWOULDBLOCK) broken = true;
        }
        if (!broken && (re & (POLLIN | POLLHUP))) {
            std::uint8_t buf[65536];
            while (true) {
                const ssize_t n = ::recv(c->fd, buf, sizeof(buf), 0);
                if (n > 0) {
                    c->rbuf.feed(ByteView(buf, static_cast<std::size_t>(n)));
                    continue;
                }
                if (n == 0 || (errno != EAGAIN && errno != EWOULDBLOCK)) broken = true;
                break;
            }
            try {
                while (auto frame = c->rbuf.next())
                    if (c->owner && c->owner->receiver_) c->owner->receiver_(std::move(*frame));
            } catch (const MalformedError&) {
                broken = true;
            }
        }
        if (broken) dead.push_back(c);
    }
    for (Conn* c : dead) {
        for (std::size_t i = 0; i < conns_.size(); ++i)
            if (conns_[i].get() == c) {
                close_conn(i);
                break;
            }
    }
}

void LiveLoop::run() {
    stop_ = false;
    while (!stop_) {
        poll_once(ms(200));
        run_timers();
    }
}

bool LiveLoop::run_until(const std::function<bool()>& done, Duration timeout) {
    const Time deadline = now() + timeout;
    stop_ = false;
    while (!done() && !stop_ && now() < deadline) {
        poll_once(std::min<Duration>(ms(50), std::max<Duration>(0, deadline - now())));
        run_timers();
    }
    return done();
}

LiveRuntime::~LiveRuntime() { loop_.remove_node(this); }

TimerId LiveRuntime::after(Duration delay, std::function<void()> fn) {
    return loop_.add_timer(loop_.now() + std::max<Duration>(delay, 0), std::move(fn));
}

void LiveRuntime::trace(std::string_view event) {
    if (on_trace) on_trace(event);
}

}  // namespace zephyr::net
