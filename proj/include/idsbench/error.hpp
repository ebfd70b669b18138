#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace ids {

// Numeric values double as CLI exit codes and C API status codes.
enum class ErrorCode : int {
    Config = 2,
    Data = 3,
    Training = 4,
    Expectation = 5,
    Io = 6,
    InvalidArgument = 7,
};

/// Exception carrying a category code and a short machine-readable kind
/// (e.g. "HeaderMismatch", "SingleClassInput").
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string kind, const std::string& message)
        : std::runtime_error(kind + ": " + message), code_(code), kind_(std::move(kind)), detail_(message) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& kind() const noexcept { return kind_; }
    // Message without the kind prefix.
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string kind_;
    std::string detail_;
};

[[noreturn]] inline void fail(ErrorCode code, std::string kind, const std::string& message) {
    throw Error(code, std::move(kind), message);
}

} // namespace ids
