#pragma once

#include <optional>
#include <string>

#include "zephyr/error.hpp"

namespace zephyr {

/// Outcome of an asynchronous operation: a value, or an error code with detail.
template <typename T>
struct Result {
    std::optional<T> value;
    Errc error = Errc::InvalidArgument;
    std::string message;

    bool ok() const { return value.has_value(); }
    static Result success(T v) { return Result{std::move(v), Errc::InvalidArgument, {}}; }
    static Result failure(Errc e, std::string msg = {}) { return Result{std::nullopt, e, std::move(msg)}; }
};

}  // namespace zephyr
