#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "eleatt/tensor.hpp"

namespace eleatt {

/// Seeded random stream. Draws are built directly from the 64-bit Mersenne
/// Twister output (no std:: distributions), so sequences are identical on
/// every platform and standard library.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0);

  std::uint64_t seed() const noexcept { return seed_; }

  /// Independent child stream keyed by (seed, tag, index); does not advance this stream.
  RngStream derive(std::string_view tag, std::uint64_t index = 0) const;

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform01();
  double uniform(double lo, double hi);
  /// Standard normal via Box-Muller.
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  /// Fisher-Yates permutation of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// SplitMix64 finalizer, used for seed derivation.
std::uint64_t mix64(std::uint64_t x);

Tensor2 rng_uniform(RngStream& stream, double lo, double hi, std::size_t rows, std::size_t cols);

}  // namespace eleatt
