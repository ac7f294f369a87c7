#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace i2v {

std::string base64_encode(std::span<const std::uint8_t> bytes);
// Standard alphabet with padding; whitespace is not accepted.
std::vector<std::uint8_t> base64_decode(const std::string& text);

}  // namespace i2v
