#pragma once

#include <cstdint>
#include <random>

#include "moire/tensor.hpp"

namespace moire {

// Portable deterministic generator: mt19937_64 with explicit mappings, so the
// same seed yields the same stream on every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n)
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : engine_() % n; }

  template <typename T>
  Tensor<T> uniform_tensor(Shape s, double lo, double hi) {
    Tensor<T> t(s);
    for (auto& v : t.data()) v = static_cast<T>(uniform(lo, hi));
    return t;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace moire
