#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace zephyr {

enum class Errc {
    InvalidArgument,
    InvalidIdentity,
    PayloadTooLong,
    LengthError,
    MalformedInput,
    DecodeError,
    RouteTooShort,
    WrongRound,
    UnknownRound,
    IncompleteBundle,
    StaleRound,
    InvalidEmail,
    RateLimited,
    Rejected,
    NoMixers,
    NoLiveCandidates,
    LookupFailed,
    NotJoined,
    Timeout,
    ConfigInvalid,
    InvariantViolation,
    Unreachable,
    Io,
    BarrierTimeout,
    QuorumUnreachable,
    RotationTimeout,
    UnknownOpcode,
    NotCoordinator,
    BlobTooLarge,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

/// Raised by every decoder; `offset` is the position of the first byte that
/// could not be consumed.
class MalformedError : public Error {
public:
    MalformedError(std::size_t offset, const std::string& what)
        : Error(Errc::MalformedInput, what + " at offset " + std::to_string(offset)), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

}  // namespace zephyr
