#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "ncsae/matrix.hpp"

namespace ncsae {

/// Seeded generator. The engine is std::mt19937_64, whose output sequence is
/// fixed by the C++ standard. Doubles are formed from the top 53 bits of each
/// draw instead of through std::uniform_real_distribution, whose algorithm is
/// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  /// Uniform in [0, 1).
  double next_unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) {
    const double v = lo + (hi - lo) * next_unit();
    return v < hi ? v : std::nextafter(hi, lo);
  }

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

/// rows x cols matrix of i.i.d. uniform draws in [lo, hi), filled row-major.
/// Throws std::invalid_argument when lo >= hi.
Matrix rng_uniform(Rng& rng, double lo, double hi, std::size_t rows, std::size_t cols);

}  // namespace ncsae
