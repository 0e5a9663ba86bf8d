#pragma once

#include <stdexcept>
#include <string>

namespace evirex {

// Error taxonomy shared by the C++ core and the C API (which maps kinds to
// integer codes at the boundary).
enum class ErrorKind {
    io,
    parse,
    validation,
    config,
    dimension,
    contract,
    state,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string message)
        : std::runtime_error(std::move(message)), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

} // namespace evirex
