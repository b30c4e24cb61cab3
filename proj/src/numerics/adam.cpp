#include "mats/numerics/adam.hpp"

#include <cmath>

#include "mats/error.hpp"

namespace mats {

Adam::Adam(std::size_t size, double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon), m_(size, 0.0),
      v_(size, 0.0) {
  if (!(learning_rate > 0.0)) throw ConfigError("adam: learning rate must be positive");
}

void Adam::descend(std::span<double> params, std::span<const double> grad) {
  step(params, grad, -1.0);
}

void Adam::ascend(std::span<double> params, std::span<const double> grad) {
  step(params, grad, 1.0);
}

void Adam::step(std::span<double> params, std::span<const double> grad, double sign) {
  if (params.size() != m_.size() || grad.size() != m_.size())
    throw InvalidArgument("adam: size mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    const double mhat = m_[i] / c1;
    const double vhat = v_[i] / c2;
    params[i] += sign * lr_ * mhat / (std::sqrt(vhat) + eps_);
  }
}

}  // namespace mats
