#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace radap::core {

// FNV-1a 64-bit; a stable content fingerprint for manifests, not a secure hash.
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fingerprint_file(const std::filesystem::path& path);

std::string fingerprint_hex(std::uint64_t value);

}  // namespace radap::core
