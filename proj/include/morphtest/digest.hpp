#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace morphtest {

/// Lower-case hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// 64-bit FNV-1a. Stable across platforms, used wherever a seed or bucket
/// must be reproducible from text.
constexpr std::uint64_t fnv1a64(std::string_view data,
                                std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t combine_seed(std::uint64_t a, std::uint64_t b) {
  return mix64(a ^ mix64(b));
}

/// Seed for one metamorphic group: depends only on the campaign seed, the
/// input's position in the data file and the relation id.
constexpr std::uint64_t derive_group_seed(std::uint64_t campaign_seed,
                                          std::uint64_t input_index,
                                          std::string_view relation_id) {
  return combine_seed(combine_seed(campaign_seed, input_index),
                      fnv1a64(relation_id));
}

}  // namespace morphtest
