#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace adhmc {

using Rng = std::mt19937_64;

// Seed splitting: every substream is seeded with
//   splitmix64(seed ^ splitmix64(fnv1a(tag) + index))
// so a single 64-bit experiment seed determines all randomness, and
// substreams for different (tag, index) pairs never share state.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a(std::string_view text);
std::uint64_t substream_seed(std::uint64_t seed, std::string_view tag,
                             std::uint64_t index = 0);
Rng make_stream(std::uint64_t seed, std::string_view tag,
                std::uint64_t index = 0);

/// Fresh independent stream derived from a parent stream's next output.
Rng fork(Rng& parent);

}  // namespace adhmc
