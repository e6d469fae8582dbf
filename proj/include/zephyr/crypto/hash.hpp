#pragma once

#include <initializer_list>
#include <string_view>

#include "zephyr/bytes.hpp"

namespace zephyr::crypto {

using Digest32 = ByteArray<32>;
using Digest20 = ByteArray<20>;

/// BLAKE2b over `tag || 0x00 || part0 || part1 ...` with the given output length (16..64).
Bytes tagged_hash(std::string_view tag, std::initializer_list<ByteView> parts, std::size_t out_len);

Digest32 hash256(std::string_view tag, std::initializer_list<ByteView> parts);
Digest20 hash160(std::string_view tag, std::initializer_list<ByteView> parts);

/// Counter-mode expansion of a tagged hash to `out_len` bytes.
Bytes expand(std::string_view tag, std::initializer_list<ByteView> parts, std::size_t out_len);

}  // namespace zephyr::crypto
