#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ncl {

using Rng = std::mt19937_64;

/// 64-bit FNV-1a over raw bytes. Stable across platforms and runs.
constexpr std::uint64_t fnv1a(std::string_view bytes,
                              std::uint64_t h = 0xcbf29ce484222325ULL) noexcept {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Child seed for a named sub-stream, independent of call order.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view key) noexcept {
  return mix64(fnv1a(key, mix64(seed)));
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t key) noexcept {
  return mix64(mix64(seed) ^ mix64(key + 0x632be59bd9b4e019ULL));
}

}  // namespace ncl
