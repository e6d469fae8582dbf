#pragma once

#include "zephyr/bytes.hpp"

namespace zephyr::crypto {

using Poly1305Tag = ByteArray<16>;

Poly1305Tag poly1305(ByteView message, const ByteArray<32>& one_time_key);

}  // namespace zephyr::crypto
