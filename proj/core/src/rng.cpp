#include "gahne/rng.hpp"

#include "gahne/errors.hpp"

namespace gahne {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {

uint64_t fnv1a(std::string_view text) {
  uint64_t hash = 0xcbf29ce484222325ULL;
  for (char c : text) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

}  // namespace

uint64_t derive_seed(uint64_t root, std::string_view purpose, uint64_t index) {
  uint64_t mixed = splitmix64(root ^ fnv1a(purpose));
  return splitmix64(mixed ^ splitmix64(index));
}

int64_t Rng::next_below(int64_t n) {
  if (n <= 0) throw ConfigError("Rng::next_below: bound must be positive");
  const uint64_t bound = static_cast<uint64_t>(n);
  const uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    uint64_t r = next_u64();
    if (r >= threshold) return static_cast<int64_t>(r % bound);
  }
}

}  // namespace gahne
