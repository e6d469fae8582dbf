#include "zephyr/bytes.hpp"

#include <sodium.h>

#include "zephyr/error.hpp"

namespace zephyr {

std::string to_hex(ByteView b) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(b.size() * 2);
    for (auto c : b) {
        out.push_back(digits[c >> 4]);
        out.push_back(digits[c & 15]);
    }
    return out;
}

Bytes from_hex(std::string_view hex) {
    if (hex.size() % 2 != 0) throw Error(Errc::DecodeError, "odd-length hex string");
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    Bytes out(hex.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const int hi = nibble(hex[2 * i]);
        const int lo = nibble(hex[2 * i + 1]);
        if (hi < 0 || lo < 0) throw Error(Errc::DecodeError, "invalid hex digit");
        out[i] = std::uint8_t((hi << 4) | lo);
    }
    return out;
}

std::string base64_encode(ByteView b) {
    const auto variant = sodium_base64_VARIANT_ORIGINAL;
    std::string out(sodium_base64_ENCODED_LEN(b.size(), variant), '\0');
    sodium_bin2base64(out.data(), out.size(), b.data(), b.size(), variant);
    out.resize(out.size() - 1);  // trailing NUL
    return out;
}

Bytes base64_decode(std::string_view text) {
    Bytes out(text.size() / 4 * 3 + 3);
    std::size_t len = 0;
    if (sodium_base642bin(out.data(), out.size(), text.data(), text.size(), nullptr, &len, nullptr,
                          sodium_base64_VARIANT_ORIGINAL) != 0)
        throw Error(Errc::DecodeError, "invalid base64");
    out.resize(len);
    return out;
}

bool equal_ct(ByteView a, ByteView b) {
    if (a.size() != b.size()) return false;
    std::uint8_t acc = 0;
    for (std::size_t i = 0; i < a.size(); ++i) acc |= a[i] ^ b[i];
    return acc == 0;
}

const char* errc_name(Errc c) {
    switch (c) {
        case Errc::InvalidArgument: return "invalid-argument";
        case Errc::InvalidIdentity: return "invalid-identity";
        case Errc::PayloadTooLong: return "payload-too-long";
        case Errc::LengthError: return "length-error";
        case Errc::MalformedInput: return "malformed-serialization";
        case Errc::DecodeError: return "decode-error";
        case Errc::RouteTooShort: return "route-too-short";
        case Errc::WrongRound: return "wrong-round";
        case Errc::UnknownRound: return "unknown-round";
        case Errc::IncompleteBundle: return "incomplete-bundle";
        case Errc::StaleRound: return "stale-round";
        case Errc::InvalidEmail: return "invalid-email";
        case Errc::RateLimited: return "rate-limited";
        case Errc::Rejected: return "rejected";
        case Errc::NoMixers: return "no-mixers";
        case Errc::NoLiveCandidates: return "no-live-candidates";
        case Errc::LookupFailed: return "lookup-failed";
        case Errc::NotJoined: return "network-unjoined";
        case Errc::Timeout: return "timeout";
        case Errc::ConfigInvalid: return "config-invalid";
        case Errc::InvariantViolation: return "invariant-violation";
        case Errc::Unreachable: return "unreachable";
        case Errc::Io: return "io-error";
        case Errc::BarrierTimeout: return "barrier-timeout";
        case Errc::QuorumUnreachable: return "quorum-unreachable";
        case Errc::RotationTimeout: return "rotation-timeout";
        case Errc::UnknownOpcode: return "unknown-opcode";
        case Errc::NotCoordinator: return "not-coordinator";
        case Errc::BlobTooLarge: return "blob-too-large";
    }
    return "unknown";
}

}  // namespace zephyr
