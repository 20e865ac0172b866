#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ghlfd {

// Independent generator for a named component ("sim", "init", "dropout", ...)
// derived from the single run seed. Same (seed, name) always yields the same
// stream; different names give decorrelated streams.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::string_view name) {
  // FNV-1a over the stream name.
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : name) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  return std::mt19937_64(seq);
}

// Uniform double in [0, 1) from the top 53 bits; unlike
// std::uniform_real_distribution its output is fixed by the generator alone.
inline double uniform01(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

}  // namespace ghlfd
