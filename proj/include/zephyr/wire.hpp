#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

#include "zephyr/bytes.hpp"
#include "zephyr/error.hpp"

namespace zephyr::wire {

/// Leads every serialized envelope, bundle and frame. Any change to an
/// encoding below bumps this value.
inline constexpr std::uint8_t kVersion = 1;

/// Little-endian fixed-width integers, u32 length prefixes, fields in declaration order.
class Writer {
public:
    Writer() = default;

    Writer& u8(std::uint8_t v) {
        buf_.push_back(v);
        return *this;
    }
    Writer& u16(std::uint16_t v) { return le(v, 2); }
    Writer& u32(std::uint32_t v) { return le(v, 4); }
    Writer& u64(std::uint64_t v) { return le(v, 8); }
    Writer& raw(ByteView b) {
        append(buf_, b);
        return *this;
    }
    Writer& bytes(ByteView b) {
        u32(static_cast<std::uint32_t>(b.size()));
        return raw(b);
    }
    Writer& str(std::string_view s) { return bytes(as_bytes(s)); }
    Writer& version() { return u8(kVersion); }

    const Bytes& data() const& { return buf_; }
    Bytes take() && { return std::move(buf_); }
    std::size_t size() const { return buf_.size(); }

private:
    Writer& le(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) buf_.push_back(std::uint8_t(v >> (8 * i)));
        return *this;
    }

    Bytes buf_;
};

/// Bounds-checked cursor; every failure throws MalformedError with the offending offset.
class Reader {
public:
    explicit Reader(ByteView data) : data_(data) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
    std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
    std::uint64_t u64() { return le(8); }

    ByteView raw(std::size_t n) {
        need(n);
        auto out = data_.subspan(pos_, n);
        pos_ += n;
        return out;
    }
    template <std::size_t N>
    ByteArray<N> array() {
        ByteArray<N> a{};
        auto v = raw(N);
        std::memcpy(a.data(), v.data(), N);
        return a;
    }
    Bytes bytes(std::size_t max_len = SIZE_MAX) {
        const std::size_t at = pos_;
        const std::uint32_t n = u32();
        if (n > max_len) throw MalformedError(at, "length prefix exceeds limit");
        auto v = raw(n);
        return {v.begin(), v.end()};
    }
    std::string str(std::size_t max_len = SIZE_MAX) {
        auto b = bytes(max_len);
        return {b.begin(), b.end()};
    }
    void version() {
        const std::size_t at = pos_;
        if (u8() != kVersion) throw MalformedError(at, "unsupported wire version");
    }

    std::size_t offset() const { return pos_; }
    std::size_t remaining() const { return data_.size() - pos_; }
    ByteView rest() { return raw(remaining()); }

    /// Rejects trailing garbage.
    void finish() const {
        if (pos_ != data_.size()) throw MalformedError(pos_, "trailing bytes");
    }

    [[noreturn]] void fail(const std::string& what) const { throw MalformedError(pos_, what); }

private:
    void need(std::size_t n) const {
        if (data_.size() - pos_ < n) throw MalformedError(pos_, "truncated input");
    }
    std::uint64_t le(int n) {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = n - 1; i >= 0; --i) v = (v << 8) | data_[pos_ + static_cast<std::size_t>(i)];
        pos_ += static_cast<std::size_t>(n);
        return v;
    }

    ByteView data_;
    std::size_t pos_ = 0;
};

}  // namespace zephyr::wire
