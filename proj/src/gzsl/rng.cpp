#include "gzsl/rng.hpp"

#include <cmath>
#include <numbers>
#include <utility>

#include "gzsl/error.hpp"

namespace gzsl::numerics {

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) fail(ErrorCode::kUsage, "Rng::below(0)");
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v = engine_();
  while (v >= limit) v = engine_();
  return v % n;
}

void Rng::shuffle(std::span<std::uint32_t> values) {
  for (std::size_t i = values.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(below(i));
    std::swap(values[i - 1], values[j]);
  }
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

DenseMatrix standard_normal(std::size_t rows, std::size_t cols, Rng& rng) {
  DenseMatrix out(rows, cols);
  for (auto& v : out.values()) v = static_cast<float>(rng.normal());
  return out;
}

DenseMatrix uniform_fan_in(std::size_t rows, std::size_t cols, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in == 0 ? 1 : fan_in));
  DenseMatrix out(rows, cols);
  for (auto& v : out.values()) v = static_cast<float>((2.0 * rng.uniform() - 1.0) * bound);
  return out;
}

DenseMatrix gaussian_sample(const DenseMatrix& mu, const DenseMatrix& logvar, Rng& rng) {
  require_same_shape(mu, logvar, "gaussian_sample");
  DenseMatrix z(mu.rows(), mu.cols());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double eps = rng.normal();
    const double sigma = std::exp(0.5 * static_cast<double>(logvar.values()[i]));
    z.values()[i] = static_cast<float>(mu.values()[i] + sigma * eps);
  }
  return z;
}

}  // namespace gzsl::numerics
