#pragma once

#include <stdexcept>
#include <string>

namespace bs {

// Error kinds mirror the status codes of the public C API.
enum class ErrorKind {
    InvalidArgument,
    Io,
    Format,
    Numeric,
    Internal,
};

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

  private:
    ErrorKind kind_;
};

[[noreturn]] inline void throw_invalid(const std::string& msg) {
    throw Error(ErrorKind::InvalidArgument, msg);
}
[[noreturn]] inline void throw_io(const std::string& msg) {
    throw Error(ErrorKind::Io, msg);
}
[[noreturn]] inline void throw_format(const std::string& msg) {
    throw Error(ErrorKind::Format, msg);
}
[[noreturn]] inline void throw_numeric(const std::string& msg) {
    throw Error(ErrorKind::Numeric, msg);
}

inline void require(bool condition, const std::string& msg) {
    if (!condition) throw_invalid(msg);
}

}  // namespace bs
