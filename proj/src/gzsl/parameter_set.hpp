#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gzsl/dense_matrix.hpp"
#include "gzsl/rng.hpp"

namespace gzsl::numerics {

struct Parameter {
  std::string name;
  DenseMatrix value;
  DenseMatrix first_moment;
  DenseMatrix second_moment;
};

// One gradient matrix per parameter, in ParameterSet order.
using Gradients = std::vector<DenseMatrix>;

class ParameterSet {
 public:
  std::size_t add(std::string name, DenseMatrix init);
  // Weight (fan_in x fan_out) and bias (1 x fan_out) with fan-in uniform init.
  std::size_t add_linear(const std::string& prefix, std::size_t fan_in, std::size_t fan_out,
                         Rng& rng);

  std::size_t size() const noexcept { return params_.size(); }
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  std::size_t index_of(const std::string& name) const;

  auto begin() noexcept { return params_.begin(); }
  auto end() noexcept { return params_.end(); }
  auto begin() const noexcept { return params_.begin(); }
  auto end() const noexcept { return params_.end(); }

  std::uint64_t step() const noexcept { return step_; }

  Gradients zero_gradients() const;

 private:
  friend struct AdamAccess;
  std::vector<Parameter> params_;
  std::uint64_t step_ = 0;
};

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected Adam. Throws kTrainingDiverged (without touching any state)
// if a gradient entry is not finite.
void adam_step(ParameterSet& params, const Gradients& gradients, const AdamOptions& options);

}  // namespace gzsl::numerics
