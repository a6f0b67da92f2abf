#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace hintbandit {

// Seeded random source with portable derived draws.
//
// std::uniform_real_distribution and friends are implementation-defined, so
// replaying a session on another standard library could diverge. Only the
// raw mt19937_64 stream (which is fully specified) is used here and every
// derived quantity is computed by hand.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). n must be positive.
  std::size_t uniform_index(std::size_t n);

  // Index i with probability weights[i] / sum(weights). Weights must be
  // nonnegative; if they sum to zero the draw is uniform over all indices.
  std::size_t categorical(std::span<const double> weights);

 private:
  std::mt19937_64 engine_;
};

// Mixes a base seed with a stream id so independent consumers (the session,
// a mock participant, ...) never share a stream.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace hintbandit
