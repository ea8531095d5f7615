#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "geosde/matrix.hpp"

namespace geosde {

class CounterRng;

enum class Activation { kTanh, kIdentity };

/// Feedforward network with per-layer activation. The default constructor
/// layout (tanh hidden layers, identity output) is what every chart and
/// coefficient network uses.
///
/// Parameters live in one flat buffer so an optimizer can treat the network
/// as a single vector. Layer l stores its weights transposed (in x out,
/// row-major) followed by its bias, which keeps the forward sweep a sequence
/// of contiguous axpy operations.
class Mlp {
 public:
  struct Layer {
    std::size_t in = 0;
    std::size_t out = 0;
    Activation activation = Activation::kTanh;
    std::size_t weight_offset = 0;
    std::size_t bias_offset = 0;
  };

  Mlp() = default;
  /// Zero-initialized network; `widths` = {input, hidden..., output}.
  explicit Mlp(std::vector<std::size_t> widths);
  Mlp(std::vector<std::size_t> widths, std::vector<Activation> activations);

  /// Glorot-uniform weights U(+-sqrt(6 / (fan_in + fan_out))), zero biases.
  static Mlp glorot(std::vector<std::size_t> widths, CounterRng& rng);

  /// outer(inner(x)). Requires inner's output layer to be linear.
  static Mlp compose(const Mlp& outer, const Mlp& inner);

  std::size_t input_dim() const { return layers_.front().in; }
  std::size_t output_dim() const { return layers_.back().out; }
  std::size_t num_layers() const { return layers_.size(); }
  std::size_t param_count() const { return params_.size(); }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<std::size_t> widths() const;

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  /// W_l[o][i] (mathematical orientation: out x in).
  double weight(std::size_t layer, std::size_t o, std::size_t i) const;
  double& weight(std::size_t layer, std::size_t o, std::size_t i);
  double bias(std::size_t layer, std::size_t o) const;
  double& bias(std::size_t layer, std::size_t o);

  bool operator==(const Mlp& other) const;

 private:
  std::vector<Layer> layers_;
  std::vector<double> params_;
};

/// Network output f(x).
Vector mlp_forward(const Mlp& net, std::span<const double> x);

/// Forward sweep that also pushes k tangent directions through the network.
/// Records everything the reverse sweep needs.
struct JetTape {
  std::size_t directions = 0;
  std::vector<Vector> activations;   // [0] = input, [l + 1] = output of layer l
  std::vector<Vector> slopes;        // activation derivative s'(a_l)
  std::vector<Matrix> tangents;      // [l]: k x width_l, row c = direction c
  std::vector<Matrix> pre_tangents;  // k x out_l, W_l T_l

  const Vector& output() const { return activations.back(); }
  /// Df(x) V as an (out x k) matrix.
  Matrix output_tangent() const { return tangents.back().transpose(); }
};

/// `directions` is (in x k); pass an empty matrix for a plain forward pass.
JetTape jet_forward(const Mlp& net, std::span<const double> x, const Matrix& directions);

/// Reverse sweep for the scalar sum <out_adjoint, f(x)> + <tangent_adjoint, Df(x) V>.
/// `out_adjoint` may be empty (zero); `tangent_adjoint` is (out x k) or empty.
/// Gradients are accumulated into `param_grad` (if non-empty), `input_adjoint`
/// and `direction_adjoint` (if non-null, overwritten; the latter is in x k).
void jet_backward(const Mlp& net, const JetTape& tape, std::span<const double> out_adjoint,
                  const Matrix& tangent_adjoint, std::span<double> param_grad,
                  Vector* input_adjoint, Matrix* direction_adjoint);

/// Output-by-input Jacobian, reverse mode when out < in, forward otherwise.
Matrix mlp_input_jacobian(const Mlp& net, std::span<const double> x);

/// (grad^2 f^j)(x) v for output `out_index`, by a dual-number forward pass
/// through the analytic backward pass. Never materializes the Hessian.
Vector mlp_input_hvp(const Mlp& net, std::span<const double> x, std::size_t out_index,
                     std::span<const double> v);

/// Gradient of seed^T f(x) with respect to all parameters (flat layout).
Vector mlp_param_gradient(const Mlp& net, std::span<const double> x,
                          std::span<const double> seed);

/// f, Df v and v^T grad^2 f^i v for every output i in one forward sweep.
struct SecondDirectional {
  Vector value;
  Vector first;
  Vector second;
};
SecondDirectional mlp_second_directional(const Mlp& net, std::span<const double> x,
                                         std::span<const double> v);

}  // namespace geosde
