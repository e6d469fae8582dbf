#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "zephyr/bytes.hpp"
#include "zephyr/error.hpp"
#include "zephyr/node_id.hpp"

namespace zephyr::net {

/// Operation codes of the common framed protocol. Values are part of the wire format.
enum class Opcode : std::uint8_t {
    // dht
    Ping = 0x01,
    Store = 0x02,
    FindNode = 0x03,
    FindValue = 0x04,
    // mixer
    Submit = 0x10,
    Forward = 0x11,
    Close = 0x12,
    Rotate = 0x13,
    Metrics = 0x14,
    // info node
    PublishKey = 0x20,
    FetchBundle = 0x21,
    // pkg
    BeginAuth = 0x30,
    CompleteAuth = 0x31,
    ServeParams = 0x32,
    RotateMaster = 0x33,
    // mailbox
    Append = 0x40,
    FetchAll = 0x41,
    Purge = 0x42,
    // coordinator and round lifecycle
    OpenRound = 0x50,
    ReportDone = 0x51,
    Heartbeat = 0x52,
    Subscribe = 0x53,
    Takeover = 0x54,
    Recovered = 0x55,
    Handback = 0x56,
};

const char* opcode_name(Opcode op);

enum class FrameKind : std::uint8_t { Request = 0, Response = 1, Error = 2, Notify = 3 };

/// version || opcode || kind || request_id || sender || reply_to || payload
struct Frame {
    Opcode opcode = Opcode::Ping;
    FrameKind kind = FrameKind::Request;
    std::uint64_t request_id = 0;
    NodeId sender;
    std::string reply_to;  // listening endpoint of the sender, "host:port"
    Bytes payload;
};

inline constexpr std::size_t kMaxFrameSize = 32u << 20;
inline constexpr std::size_t kMaxEndpointSize = 261;

Bytes encode_frame(const Frame& f);
/// Throws MalformedError on any deviation, including unknown opcodes and trailing bytes.
Frame decode_frame(ByteView data);

/// Error frames carry u16 code || message.
Bytes encode_error(Errc code, std::string_view message);
std::pair<Errc, std::string> decode_error(ByteView payload);

/// Stream transport: u32 little-endian length || frame.
Bytes length_prefixed(ByteView frame);

/// Reassembles length-prefixed frames from a byte stream.
class FrameAssembler {
public:
    void feed(ByteView data);
    /// Next complete frame, or nullopt until all of its bytes have arrived.
    /// Throws MalformedError when a length exceeds kMaxFrameSize.
    std::optional<Bytes> next();
    std::size_t buffered() const { return buf_.size() - off_; }

private:
    Bytes buf_;
    std::size_t off_ = 0;
};

}  // namespace zephyr::net
