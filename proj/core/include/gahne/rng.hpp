#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace gahne {

uint64_t splitmix64(uint64_t x);

// Stable seed derivation: every random stream in the project is keyed by
// (root seed, purpose label, index) so that runs are reproducible and
// streams stay independent when code is reordered.
uint64_t derive_seed(uint64_t root, std::string_view purpose, uint64_t index = 0);

// Counter-based generator: output i is a pure function of (key, i). The
// distribution helpers below are hand-pinned so streams are identical across
// standard library implementations.
class Rng {
 public:
  explicit Rng(uint64_t key) : key_(key) {}

  uint64_t next_u64() { return splitmix64(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

  // Uniform in [0, 1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double next_double(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Uniform in [0, n), unbiased via rejection.
  int64_t next_below(int64_t n);

  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (int64_t i = static_cast<int64_t>(values.size()) - 1; i > 0; --i) {
      std::swap(values[i], values[next_below(i + 1)]);
    }
  }

 private:
  uint64_t key_ = 0;
  uint64_t counter_ = 0;
};

}  // namespace gahne
