#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace geosde {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam over a flat parameter vector.
class AdamState {
 public:
  AdamState(std::size_t n_params, AdamConfig config = {});

  /// params -= lr * m_hat / (sqrt(v_hat) + eps). Throws on length mismatch.
  void step(std::span<double> params, std::span<const double> grads);

  void set_learning_rate(double lr) { config_.learning_rate = lr; }
  double learning_rate() const { return config_.learning_rate; }
  std::uint64_t step_count() const { return t_; }
  const std::vector<double>& first_moment() const { return m_; }
  const std::vector<double>& second_moment() const { return v_; }

 private:
  AdamConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::uint64_t t_ = 0;
};

}  // namespace geosde
