#include "zephyr/net/frame.hpp"

#include "zephyr/wire.hpp"

namespace zephyr::net {

const char* opcode_name(Opcode op) {
    switch (op) {
        case Opcode::Ping: return "PING";
        case Opcode::Store: return "STORE";
        case Opcode::FindNode: return "FIND_NODE";
        case Opcode::FindValue: return "FIND_VALUE";
        case Opcode::Submit: return "SUBMIT";
        case Opcode::Forward: return "FORWARD";
        case Opcode::Close: return "CLOSE";
        case Opcode::Rotate: return "ROTATE";
        case Opcode::Metrics: return "METRICS";
        case Opcode::PublishKey: return "PUBLISH_KEY";
        case Opcode::FetchBundle: return "FETCH_BUNDLE";
        case Opcode::BeginAuth: return "BEGIN_AUTH";
        case Opcode::CompleteAuth: return "COMPLETE_AUTH";
        case Opcode::ServeParams: return "SERVE_PARAMS";
        case Opcode::RotateMaster: return "ROTATE_MASTER";
        case Opcode::Append: return "APPEND";
        case Opcode::FetchAll: return "FETCH_ALL";
        case Opcode::Purge: return "PURGE";
        case Opcode::OpenRound: return "OPEN_ROUND";
        case Opcode::ReportDone: return "REPORT_DONE";
        case Opcode::Heartbeat: return "HEARTBEAT";
        case Opcode::Subscribe: return "SUBSCRIBE";
        case Opcode::Takeover: return "TAKEOVER";
        case Opcode::Recovered: return "RECOVERED";
        case Opcode::Handback: return "HANDBACK";
    }
    return nullptr;
}

Bytes encode_frame(const Frame& f) {
    wire::Writer w;
    w.version()
        .u8(static_cast<std::uint8_t>(f.opcode))
        .u8(static_cast<std::uint8_t>(f.kind))
        .u64(f.request_id)
        .raw(f.sender.bytes)
        .str(f.reply_to)
        .bytes(f.payload);
    return std::move(w).take();
}

Frame decode_frame(ByteView data) {
    if (data.size() > kMaxFrameSize) throw MalformedError(0, "frame too large");
    wire::Reader r(data);
    Frame f;
    r.version();
    const std::size_t op_at = r.offset();
    f.opcode = static_cast<Opcode>(r.u8());
    if (!opcode_name(f.opcode)) throw MalformedError(op_at, "unknown opcode");
    const std::size_t kind_at = r.offset();
    const std::uint8_t kind = r.u8();
    if (kind > static_cast<std::uint8_t>(FrameKind::Notify)) throw MalformedError(kind_at, "unknown frame kind");
    f.kind = static_cast<FrameKind>(kind);
    f.request_id = r.u64();
    f.sender.bytes = r.array<NodeId::kBytes>();
    f.reply_to = r.str(kMaxEndpointSize);
    f.payload = r.bytes();
    r.finish();
    return f;
}

Bytes encode_error(Errc code, std::string_view message) {
    wire::Writer w;
    w.u16(static_cast<std::uint16_t>(code)).str(message);
    return std::move(w).take();
}

std::pair<Errc, std::string> decode_error(ByteView payload) {
    wire::Reader r(payload);
    const std::size_t at = r.offset();
    const std::uint16_t code = r.u16();
    if (code > static_cast<std::uint16_t>(Errc::BlobTooLarge)) throw MalformedError(at, "unknown error code");
    std::string msg = r.str(4096);
    r.finish();
    return {static_cast<Errc>(code), std::move(msg)};
}

Bytes length_prefixed(ByteView frame) {
    Bytes out;
    out.reserve(4 + frame.size());
    const auto n = static_cast<std::uint32_t>(frame.size());
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(n >> (8 * i)));
    out.insert(out.end(), frame.begin(), frame.end());
    return out;
}

void FrameAssembler::feed(ByteView data) {
    if (off_ > 0 && off_ == buf_.size()) {
        buf_.clear();
        off_ = 0;
    }
    buf_.insert(buf_.end(), data.begin(), data.end());
}

std::optional<Bytes> FrameAssembler::next() {
    if (buffered() < 4) return std::nullopt;
    std::uint32_t len = 0;
    for (int k = 3; k >= 0; --k) len = (len << 8) | buf_[off_ + static_cast<std::size_t>(k)];
    if (len > kMaxFrameSize) throw MalformedError(off_, "frame length exceeds limit");
    if (buffered() - 4 < len) return std::nullopt;
    const auto begin = buf_.begin() + static_cast<std::ptrdiff_t>(off_ + 4);
    Bytes frame(begin, begin + len);
    off_ += 4 + len;
    if (off_ > (1u << 16) && off_ * 2 > buf_.size()) {
        buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(off_));
        off_ = 0;
    }
    return frame;
}

}  // namespace zephyr::net
