#pragma once

#include <cstdint>
#include <random>

namespace canonlift {

/// Seeded 64-bit generator. Uniform draws use the top 53 bits so sequences
/// are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform();  // [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t index(std::size_t n);  // [0, n)

 private:
  std::mt19937_64 engine_;
};

/// Stateless seed derivation (splitmix64 finalizer over the inputs).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

}  // namespace canonlift
