#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace pamtt {

/// 64-bit FNV-1a; stable across platforms, used for config and run digests.
constexpr std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (const char c : data) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

/// 16 lowercase hex digits.
std::string hex_digest(std::string_view data);

}  // namespace pamtt
