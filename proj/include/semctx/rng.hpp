#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace semctx {

/// Derives an independent stream seed from a parent seed and a named component.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view component, std::uint64_t id = 0);
std::uint64_t derive_seed(std::uint64_t seed, std::string_view component, std::string_view id);

/// Seeded generator. Draws are built from raw 64-bit engine output so streams
/// are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }
  double normal();

 private:
  std::mt19937_64 engine_;
};

}  // namespace semctx
