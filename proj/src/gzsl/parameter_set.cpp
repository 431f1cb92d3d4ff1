#include "gzsl/parameter_set.hpp"

#include <cmath>

#include "gzsl/error.hpp"

namespace gzsl::numerics {

struct AdamAccess {
  static std::uint64_t& step(ParameterSet& p) { return p.step_; }
};

std::size_t ParameterSet::add(std::string name, DenseMatrix init) {
  DenseMatrix zeros(init.rows(), init.cols());
  params_.push_back(Parameter{std::move(name), std::move(init), zeros, zeros});
  return params_.size() - 1;
}

std::size_t ParameterSet::add_linear(const std::string& prefix, std::size_t fan_in,
                                     std::size_t fan_out, Rng& rng) {
  const std::size_t w = add(prefix + ".weight", uniform_fan_in(fan_in, fan_out, fan_in, rng));
  add(prefix + ".bias", uniform_fan_in(1, fan_out, fan_in, rng));
  return w;
}

std::size_t ParameterSet::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  fail(ErrorCode::kUsage, "no parameter named '" + name + "'");
}

Gradients ParameterSet::zero_gradients() const {
  Gradients g;
  g.reserve(params_.size());
  for (const auto& p : params_) g.emplace_back(p.value.rows(), p.value.cols());
  return g;
}

void adam_step(ParameterSet& params, const Gradients& gradients, const AdamOptions& options) {
  if (!(options.learning_rate > 0.0)) {
    fail(ErrorCode::kDomain, "Adam learning rate must be positive");
  }
  if (gradients.size() != params.size()) {
    fail(ErrorCode::kShape, "Adam: " + std::to_string(gradients.size()) + " gradients for " +
                                std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    require_same_shape(params[i].value, gradients[i], "Adam gradient");
    if (!gradients[i].all_finite()) {
      fail(ErrorCode::kTrainingDiverged, "non-finite gradient for parameter '" +
                                             params[i].name + "'");
    }
  }

  auto& step = AdamAccess::step(params);
  ++step;
  const double t = static_cast<double>(step);
  const double correction1 = 1.0 - std::pow(options.beta1, t);
  const double correction2 = 1.0 - std::pow(options.beta2, t);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto value = params[i].value.values();
    auto m = params[i].first_moment.values();
    auto v = params[i].second_moment.values();
    const auto g = gradients[i].values();
    for (std::size_t k = 0; k < value.size(); ++k) {
      const double gk = g[k];
      const double mk = options.beta1 * m[k] + (1.0 - options.beta1) * gk;
      const double vk = options.beta2 * v[k] + (1.0 - options.beta2) * gk * gk;
      m[k] = static_cast<float>(mk);
      v[k] = static_cast<float>(vk);
      const double m_hat = mk / correction1;
      const double v_hat = vk / correction2;
      value[k] = static_cast<float>(value[k] -
                                    options.learning_rate * m_hat / (std::sqrt(v_hat) + options.epsilon));
    }
  }
}

}  // namespace gzsl::numerics
