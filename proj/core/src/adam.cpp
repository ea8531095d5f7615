#include "geosde/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace geosde {

AdamState::AdamState(std::size_t n_params, AdamConfig config)
    : config_(config), m_(n_params, 0.0), v_(n_params, 0.0) {}

void AdamState::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size())
    throw std::invalid_argument("AdamState::step: parameter/gradient length mismatch");
  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double lr = config_.learning_rate;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    m_[i] = b1 * m_[i] + (1.0 - b1) * g;
    v_[i] = b2 * v_[i] + (1.0 - b2) * g * g;
    params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + config_.epsilon);
  }
}

}  // namespace geosde
