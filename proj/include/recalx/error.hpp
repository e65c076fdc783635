#pragma once

#include <stdexcept>
#include <string>

namespace recalx {

// Error categories carried by every exception thrown from the library.
// The C API maps these 1:1 onto its status codes.
enum class ErrorCode {
    invalid_argument,  // bad parameter values, dimension mismatches
    io,                // file system failures
    parse,             // malformed CSV/JSON input
    domain,            // contract violations in otherwise well-formed data
    numeric,           // non-finite values where finite ones are required
    unsupported,       // operation not available for this kind/configuration
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& msg)
        : std::runtime_error(msg), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) {
    throw Error(code, msg);
}

inline void require(bool cond, ErrorCode code, const std::string& msg) {
    if (!cond) fail(code, msg);
}

// Literal messages resolve here so the success path never materializes a
// std::string; the message is built only when the check fails.
inline void require(bool cond, ErrorCode code, const char* msg) {
    if (!cond) fail(code, std::string(msg));
}

}  // namespace recalx
