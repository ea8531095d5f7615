#include "geosde/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "geosde/rng.hpp"

namespace geosde {

namespace {

void require_input(const Mlp& net, std::size_t n, const char* what) {
  if (net.num_layers() == 0) throw std::invalid_argument(std::string(what) + ": empty network");
  if (n != net.input_dim()) {
    throw std::invalid_argument(std::string(what) + ": input length " + std::to_string(n) +
                                " != network input width " + std::to_string(net.input_dim()));
  }
}

// Forward-mode scalar for the Hessian-vector product.
struct Dual {
  double v = 0.0;
  double d = 0.0;
};
inline Dual operator+(Dual a, Dual b) { return {a.v + b.v, a.d + b.d}; }
inline Dual operator-(double a, Dual b) { return {a - b.v, -b.d}; }
inline Dual operator*(Dual a, Dual b) { return {a.v * b.v, a.v * b.d + a.d * b.v}; }
inline Dual operator*(double a, Dual b) { return {a * b.v, a * b.d}; }
inline Dual dual_tanh(Dual a) {
  const double t = std::tanh(a.v);
  return {t, (1.0 - t * t) * a.d};
}

}  // namespace

Mlp::Mlp(std::vector<std::size_t> widths) : Mlp(widths, {}) {}

Mlp::Mlp(std::vector<std::size_t> widths, std::vector<Activation> activations) {
  if (widths.size() < 2) throw std::invalid_argument("Mlp: need at least input and output widths");
  for (auto w : widths)
    if (w == 0) throw std::invalid_argument("Mlp: layer widths must be positive");
  const std::size_t n_layers = widths.size() - 1;
  if (activations.empty()) {
    activations.assign(n_layers, Activation::kTanh);
    activations.back() = Activation::kIdentity;
  }
  if (activations.size() != n_layers) throw std::invalid_argument("Mlp: one activation per layer");
  std::size_t offset = 0;
  for (std::size_t l = 0; l < n_layers; ++l) {
    Layer layer{widths[l], widths[l + 1], activations[l], offset, 0};
    offset += layer.in * layer.out;
    layer.bias_offset = offset;
    offset += layer.out;
    layers_.push_back(layer);
  }
  params_.assign(offset, 0.0);
}

Mlp Mlp::glorot(std::vector<std::size_t> widths, CounterRng& rng) {
  Mlp net(std::move(widths));
  for (const Layer& layer : net.layers_) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
    for (std::size_t k = 0; k < layer.in * layer.out; ++k)
      net.params_[layer.weight_offset + k] = rng.uniform(-limit, limit);
  }
  return net;
}

Mlp Mlp::compose(const Mlp& outer, const Mlp& inner) {
  if (inner.output_dim() != outer.input_dim())
    throw std::invalid_argument("Mlp::compose: inner output width != outer input width");
  if (inner.layers_.back().activation != Activation::kIdentity)
    throw std::invalid_argument("Mlp::compose: inner network must have a linear output layer");
  // Linear output layer of `inner` followed by the first affine map of `outer`
  // is kept as two layers; only the activation pattern is concatenated.
  std::vector<std::size_t> widths = inner.widths();
  std::vector<Activation> acts;
  for (const auto& l : inner.layers_) acts.push_back(l.activation);
  for (std::size_t l = 0; l < outer.layers_.size(); ++l) {
    widths.push_back(outer.layers_[l].out);
    acts.push_back(outer.layers_[l].activation);
  }
  Mlp out(widths, acts);
  std::copy(inner.params_.begin(), inner.params_.end(), out.params_.begin());
  std::copy(outer.params_.begin(), outer.params_.end(),
            out.params_.begin() + static_cast<std::ptrdiff_t>(inner.params_.size()));
  return out;
}

std::vector<std::size_t> Mlp::widths() const {
  std::vector<std::size_t> w{layers_.front().in};
  for (const auto& l : layers_) w.push_back(l.out);
  return w;
}

double Mlp::weight(std::size_t layer, std::size_t o, std::size_t i) const {
  const Layer& l = layers_.at(layer);
  return params_[l.weight_offset + i * l.out + o];
}
double& Mlp::weight(std::size_t layer, std::size_t o, std::size_t i) {
  const Layer& l = layers_.at(layer);
  return params_[l.weight_offset + i * l.out + o];
}
double Mlp::bias(std::size_t layer, std::size_t o) const {
  return params_[layers_.at(layer).bias_offset + o];
}
double& Mlp::bias(std::size_t layer, std::size_t o) {
  return params_[layers_.at(layer).bias_offset + o];
}

bool Mlp::operator==(const Mlp& other) const {
  if (layers_.size() != other.layers_.size()) return false;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l].in != other.layers_[l].in || layers_[l].out != other.layers_[l].out ||
        layers_[l].activation != other.layers_[l].activation)
      return false;
  }
  return params_ == other.params_;
}

Vector mlp_forward(const Mlp& net, std::span<const double> x) {
  require_input(net, x.size(), "mlp_forward");
  const auto params = net.params();
  Vector h(x.begin(), x.end());
  Vector a;
  for (const auto& layer : net.layers()) {
    a.assign(params.begin() + static_cast<std::ptrdiff_t>(layer.bias_offset),
             params.begin() + static_cast<std::ptrdiff_t>(layer.bias_offset + layer.out));
    const double* w = params.data() + layer.weight_offset;
    for (std::size_t i = 0; i < layer.in; ++i) {
      const double hi = h[i];
      const double* wrow = w + i * layer.out;
      for (std::size_t o = 0; o < layer.out; ++o) a[o] += hi * wrow[o];
    }
    if (layer.activation == Activation::kTanh)
      for (auto& v : a) v = std::tanh(v);
    h.swap(a);
  }
  return h;
}

JetTape jet_forward(const Mlp& net, std::span<const double> x, const Matrix& directions) {
  require_input(net, x.size(), "jet_forward");
  const std::size_t k = directions.empty() ? 0 : directions.cols();
  if (k > 0 && directions.rows() != net.input_dim())
    throw std::invalid_argument("jet_forward: direction matrix must be (input width x k)");
  const auto params = net.params();
  JetTape tape;
  tape.directions = k;
  tape.activations.reserve(net.num_layers() + 1);
  tape.activations.emplace_back(x.begin(), x.end());
  tape.tangents.reserve(net.num_layers() + 1);
  tape.tangents.push_back(k > 0 ? directions.transpose() : Matrix());

  for (const auto& layer : net.layers()) {
    const Vector& h = tape.activations.back();
    const Matrix& t = tape.tangents.back();
    const double* w = params.data() + layer.weight_offset;

    Vector a(params.begin() + static_cast<std::ptrdiff_t>(layer.bias_offset),
             params.begin() + static_cast<std::ptrdiff_t>(layer.bias_offset + layer.out));
    Matrix pre(k, layer.out);
    for (std::size_t i = 0; i < layer.in; ++i) {
      const double* wrow = w + i * layer.out;
      const double hi = h[i];
      for (std::size_t o = 0; o < layer.out; ++o) a[o] += hi * wrow[o];
      for (std::size_t c = 0; c < k; ++c) {
        const double tci = t(c, i);
        if (tci == 0.0) continue;
        double* prow = pre.row(c).data();
        for (std::size_t o = 0; o < layer.out; ++o) prow[o] += tci * wrow[o];
      }
    }
    Vector slope(layer.out, 1.0);
    if (layer.activation == Activation::kTanh) {
      for (std::size_t o = 0; o < layer.out; ++o) {
        a[o] = std::tanh(a[o]);
        slope[o] = 1.0 - a[o] * a[o];
      }
    }
    Matrix tangent = pre;
    if (layer.activation == Activation::kTanh) {
      for (std::size_t c = 0; c < k; ++c) {
        auto row = tangent.row(c);
        for (std::size_t o = 0; o < layer.out; ++o) row[o] *= slope[o];
      }
    }
    tape.activations.push_back(std::move(a));
    tape.slopes.push_back(std::move(slope));
    tape.pre_tangents.push_back(std::move(pre));
    tape.tangents.push_back(std::move(tangent));
  }
  return tape;
}

void jet_backward(const Mlp& net, const JetTape& tape, std::span<const double> out_adjoint,
                  const Matrix& tangent_adjoint, std::span<double> param_grad,
                  Vector* input_adjoint, Matrix* direction_adjoint) {
  const std::size_t k = tape.directions;
  const bool with_tangent = !tangent_adjoint.empty();
  if (with_tangent && (tangent_adjoint.rows() != net.output_dim() || tangent_adjoint.cols() != k))
    throw std::invalid_argument("jet_backward: tangent adjoint must be (output width x k)");
  if (!out_adjoint.empty() && out_adjoint.size() != net.output_dim())
    throw std::invalid_argument("jet_backward: output adjoint length mismatch");
  if (!param_grad.empty() && param_grad.size() != net.param_count())
    throw std::invalid_argument("jet_backward: parameter gradient length mismatch");
  const auto params = net.params();

  Vector h_bar = out_adjoint.empty() ? Vector(net.output_dim(), 0.0)
                                     : Vector(out_adjoint.begin(), out_adjoint.end());
  Matrix t_bar = with_tangent ? tangent_adjoint.transpose() : Matrix();  // k x width

  for (std::size_t l = net.num_layers(); l-- > 0;) {
    const auto& layer = net.layers()[l];
    const Vector& h_in = tape.activations[l];
    const Vector& h_out = tape.activations[l + 1];
    const Vector& slope = tape.slopes[l];
    const Matrix& t_in = tape.tangents[l];
    const double* w = params.data() + layer.weight_offset;
    const bool is_tanh = layer.activation == Activation::kTanh;

    Vector a_bar(layer.out);
    for (std::size_t o = 0; o < layer.out; ++o) a_bar[o] = slope[o] * h_bar[o];
    Matrix pre_bar;
    if (with_tangent) {
      pre_bar = t_bar;
      if (is_tanh) {
        const Matrix& pre = tape.pre_tangents[l];
        for (std::size_t c = 0; c < k; ++c) {
          auto pb = pre_bar.row(c);
          auto tb = t_bar.row(c);
          auto pr = pre.row(c);
          for (std::size_t o = 0; o < layer.out; ++o) {
            // s''(a) = -2 tanh(a) s'(a)
            a_bar[o] += -2.0 * h_out[o] * slope[o] * tb[o] * pr[o];
            pb[o] *= slope[o];
          }
        }
      }
    }

    if (!param_grad.empty()) {
      double* gw = param_grad.data() + layer.weight_offset;
      double* gb = param_grad.data() + layer.bias_offset;
      for (std::size_t o = 0; o < layer.out; ++o) gb[o] += a_bar[o];
      for (std::size_t i = 0; i < layer.in; ++i) {
        double* grow = gw + i * layer.out;
        const double hi = h_in[i];
        for (std::size_t o = 0; o < layer.out; ++o) grow[o] += hi * a_bar[o];
        if (with_tangent) {
          for (std::size_t c = 0; c < k; ++c) {
            const double tci = t_in(c, i);
            if (tci == 0.0) continue;
            const double* pb = pre_bar.row(c).data();
            for (std::size_t o = 0; o < layer.out; ++o) grow[o] += tci * pb[o];
          }
        }
      }
    }

    Vector h_bar_in(layer.in, 0.0);
    Matrix t_bar_in = with_tangent ? Matrix(k, layer.in) : Matrix();
    for (std::size_t i = 0; i < layer.in; ++i) {
      const double* wrow = w + i * layer.out;
      double s = 0.0;
      for (std::size_t o = 0; o < layer.out; ++o) s += wrow[o] * a_bar[o];
      h_bar_in[i] = s;
      if (with_tangent) {
        for (std::size_t c = 0; c < k; ++c) {
          const double* pb = pre_bar.row(c).data();
          double sc = 0.0;
          for (std::size_t o = 0; o < layer.out; ++o) sc += wrow[o] * pb[o];
          t_bar_in(c, i) = sc;
        }
      }
    }
    h_bar.swap(h_bar_in);
    t_bar = std::move(t_bar_in);
  }
  if (input_adjoint != nullptr) *input_adjoint = std::move(h_bar);
  if (direction_adjoint != nullptr) {
    *direction_adjoint = with_tangent ? t_bar.transpose() : Matrix(net.input_dim(), k);
  }
}

Matrix mlp_input_jacobian(const Mlp& net, std::span<const double> x) {
  require_input(net, x.size(), "mlp_input_jacobian");
  const std::size_t n_in = net.input_dim();
  const std::size_t n_out = net.output_dim();
  if (n_out < n_in) {
    const JetTape tape = jet_forward(net, x, Matrix());
    Matrix jac(n_out, n_in);
    Vector seed(n_out, 0.0);
    Vector grad;
    for (std::size_t j = 0; j < n_out; ++j) {
      seed.assign(n_out, 0.0);
      seed[j] = 1.0;
      jet_backward(net, tape, seed, Matrix(), {}, &grad, nullptr);
      std::copy(grad.begin(), grad.end(), jac.row(j).begin());
    }
    return jac;
  }
  return jet_forward(net, x, Matrix::identity(n_in)).output_tangent();
}

Vector mlp_input_hvp(const Mlp& net, std::span<const double> x, std::size_t out_index,
                     std::span<const double> v) {
  require_input(net, x.size(), "mlp_input_hvp");
  if (v.size() != x.size()) throw std::invalid_argument("mlp_input_hvp: direction length mismatch");
  if (out_index >= net.output_dim()) throw std::invalid_argument("mlp_input_hvp: bad output index");
  const auto params = net.params();

  std::vector<std::vector<Dual>> acts;
  acts.reserve(net.num_layers() + 1);
  std::vector<Dual> h(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) h[i] = {x[i], v[i]};
  acts.push_back(h);
  for (const auto& layer : net.layers()) {
    const double* w = params.data() + layer.weight_offset;
    std::vector<Dual> a(layer.out);
    for (std::size_t o = 0; o < layer.out; ++o) a[o] = {params[layer.bias_offset + o], 0.0};
    const auto& hin = acts.back();
    for (std::size_t i = 0; i < layer.in; ++i) {
      const double* wrow = w + i * layer.out;
      for (std::size_t o = 0; o < layer.out; ++o) a[o] = a[o] + wrow[o] * hin[i];
    }
    if (layer.activation == Activation::kTanh)
      for (auto& ao : a) ao = dual_tanh(ao);
    acts.push_back(std::move(a));
  }

  std::vector<Dual> bar(net.output_dim());
  bar[out_index] = {1.0, 0.0};
  for (std::size_t l = net.num_layers(); l-- > 0;) {
    const auto& layer = net.layers()[l];
    const double* w = params.data() + layer.weight_offset;
    const auto& hout = acts[l + 1];
    if (layer.activation == Activation::kTanh)
      for (std::size_t o = 0; o < layer.out; ++o) bar[o] = (1.0 - hout[o] * hout[o]) * bar[o];
    std::vector<Dual> next(layer.in);
    for (std::size_t i = 0; i < layer.in; ++i) {
      const double* wrow = w + i * layer.out;
      Dual s;
      for (std::size_t o = 0; o < layer.out; ++o) s = s + wrow[o] * bar[o];
      next[i] = s;
    }
    bar.swap(next);
  }
  Vector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = bar[i].d;
  return out;
}

Vector mlp_param_gradient(const Mlp& net, std::span<const double> x,
                          std::span<const double> seed) {
  if (seed.size() != net.output_dim())
    throw std::invalid_argument("mlp_param_gradient: seed length != output width");
  const JetTape tape = jet_forward(net, x, Matrix());
  Vector grad(net.param_count(), 0.0);
  jet_backward(net, tape, seed, Matrix(), grad, nullptr, nullptr);
  return grad;
}

SecondDirectional mlp_second_directional(const Mlp& net, std::span<const double> x,
                                         std::span<const double> v) {
  require_input(net, x.size(), "mlp_second_directional");
  if (v.size() != x.size())
    throw std::invalid_argument("mlp_second_directional: direction length mismatch");
  const auto params = net.params();
  Vector h(x.begin(), x.end());
  Vector dh(v.begin(), v.end());
  Vector ddh(x.size(), 0.0);
  for (const auto& layer : net.layers()) {
    const double* w = params.data() + layer.weight_offset;
    Vector a(params.begin() + static_cast<std::ptrdiff_t>(layer.bias_offset),
             params.begin() + static_cast<std::ptrdiff_t>(layer.bias_offset + layer.out));
    Vector da(layer.out, 0.0);
    Vector dda(layer.out, 0.0);
    for (std::size_t i = 0; i < layer.in; ++i) {
      const double* wrow = w + i * layer.out;
      for (std::size_t o = 0; o < layer.out; ++o) {
        a[o] += wrow[o] * h[i];
        da[o] += wrow[o] * dh[i];
        dda[o] += wrow[o] * ddh[i];
      }
    }
    if (layer.activation == Activation::kTanh) {
      for (std::size_t o = 0; o < layer.out; ++o) {
        const double t = std::tanh(a[o]);
        const double s1 = 1.0 - t * t;
        a[o] = t;
        dda[o] = s1 * dda[o] - 2.0 * t * s1 * da[o] * da[o];
        da[o] = s1 * da[o];
      }
    }
    h.swap(a);
    dh.swap(da);
    ddh.swap(dda);
  }
  return {std::move(h), std::move(dh), std::move(ddh)};
}

}  // namespace geosde
