#include "adhmc/rng.hpp"

namespace adhmc {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t substream_seed(std::uint64_t seed, std::string_view tag,
                             std::uint64_t index) {
  return splitmix64(seed ^ splitmix64(fnv1a(tag) + index));
}

Rng make_stream(std::uint64_t seed, std::string_view tag, std::uint64_t index) {
  return Rng(substream_seed(seed, tag, index));
}

Rng fork(Rng& parent) { return Rng(splitmix64(parent())); }

}  // namespace adhmc
