#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace actree::util {

// 64-bit FNV-1a. Used for provenance digests, not for security.
constexpr std::uint64_t fnv1a(std::string_view bytes,
                              std::uint64_t hash = 0xcbf29ce484222325ULL) noexcept {
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string hex_digest(std::string_view bytes);

}  // namespace actree::util
