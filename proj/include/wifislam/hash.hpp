#pragma once

#include <cstdint>
#include <string_view>

namespace wifislam {

// FNV-1a 64-bit hash; used for content checksums and stream-seed derivation.
inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 14695981039346656037ull;
  for (const char c : data) {
    h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace wifislam
