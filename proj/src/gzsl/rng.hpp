#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

#include "gzsl/dense_matrix.hpp"

namespace gzsl::numerics {

// Seeded random stream. Only the raw 64-bit engine output is taken from the
// standard library; the real-valued conversions are spelled out here so that
// the stream is identical across standard library implementations.
class Rng {
 public:
  static constexpr std::string_view kAlgorithm = "mt19937_64/box-muller";

  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }
  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  double normal();
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  void shuffle(std::span<std::uint32_t> values);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// SplitMix64 finaliser over (seed, stream); used to give each class or stage
// its own independent stream.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

DenseMatrix standard_normal(std::size_t rows, std::size_t cols, Rng& rng);

// Symmetric uniform fan-in init, bound = 1/sqrt(fan_in).
DenseMatrix uniform_fan_in(std::size_t rows, std::size_t cols, std::size_t fan_in, Rng& rng);

// z = mu + exp(logvar / 2) * eps, eps ~ N(0, I) drawn row-major from rng.
DenseMatrix gaussian_sample(const DenseMatrix& mu, const DenseMatrix& logvar, Rng& rng);

}  // namespace gzsl::numerics
