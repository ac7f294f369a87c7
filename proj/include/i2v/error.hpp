#pragma once

#include <stdexcept>
#include <string>

namespace i2v {

/// Domain error raised by every module; the message is the diagnostic shown
/// to CLI and HTTP callers.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace i2v
