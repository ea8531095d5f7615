#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace geosde::oracle {

Vector reference_forward(const Mlp& net, std::span<const double> x) {
  Vector a(x.begin(), x.end());
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const auto& layer = net.layers()[l];
    Vector next(layer.out);
    for (std::size_t o = 0; o < layer.out; ++o) {
      double s = net.bias(l, o);
      for (std::size_t i = 0; i < layer.in; ++i) s += net.weight(l, o, i) * a[i];
      next[o] = layer.activation == Activation::kTanh ? std::tanh(s) : s;
    }
    a = std::move(next);
  }
  return a;
}

NetworkDerivatives reference_derivatives(const Mlp& net, std::span<const double> x) {
  const std::size_t n = x.size();
  Vector a(x.begin(), x.end());
  Matrix jac = Matrix::identity(n);
  std::vector<Matrix> hes(n, Matrix(n, n));
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const auto& layer = net.layers()[l];
    Vector pre(layer.out);
    Matrix dpre(layer.out, n);
    std::vector<Matrix> hpre(layer.out, Matrix(n, n));
    for (std::size_t o = 0; o < layer.out; ++o) {
      pre[o] = net.bias(l, o);
      for (std::size_t i = 0; i < layer.in; ++i) {
        const double w = net.weight(l, o, i);
        pre[o] += w * a[i];
        for (std::size_t c = 0; c < n; ++c) dpre(o, c) += w * jac(i, c);
        hpre[o] += w * hes[i];
      }
    }
    if (layer.activation == Activation::kTanh) {
      for (std::size_t o = 0; o < layer.out; ++o) {
        const double t = std::tanh(pre[o]);
        const double s1 = 1.0 - t * t;
        const double s2 = -2.0 * t * s1;
        pre[o] = t;
        Matrix h = s1 * hpre[o];
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t c = 0; c < n; ++c) h(r, c) += s2 * dpre(o, r) * dpre(o, c);
        hpre[o] = std::move(h);
        for (std::size_t c = 0; c < n; ++c) dpre(o, c) *= s1;
      }
    }
    a = std::move(pre);
    jac = std::move(dpre);
    hes = std::move(hpre);
  }
  return {std::move(a), std::move(jac), std::move(hes)};
}

Matrix fd_jacobian(const VectorFn& f, std::span<const double> x, double h) {
  Vector xp(x.begin(), x.end());
  Matrix out;
  for (std::size_t k = 0; k < x.size(); ++k) {
    xp[k] = x[k] + h;
    const Vector fp = f(xp);
    xp[k] = x[k] - h;
    const Vector fm = f(xp);
    xp[k] = x[k];
    if (out.empty()) out = Matrix(fp.size(), x.size());
    for (std::size_t r = 0; r < fp.size(); ++r) out(r, k) = (fp[r] - fm[r]) / (2.0 * h);
  }
  return out;
}

Vector fd_gradient(const ScalarFn& f, std::span<const double> x, double h) {
  Vector xp(x.begin(), x.end());
  Vector g(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    xp[k] = x[k] + h;
    const double fp = f(xp);
    xp[k] = x[k] - h;
    const double fm = f(xp);
    xp[k] = x[k];
    g[k] = (fp - fm) / (2.0 * h);
  }
  return g;
}

Vector fd_param_gradient(const Mlp& net, std::span<const double> x, std::span<const double> seed,
                         double h) {
  Mlp work = net;
  Vector g(net.param_count());
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double p = work.params()[k];
    work.params()[k] = p + h;
    const double fp = dot(seed, reference_forward(work, x));
    work.params()[k] = p - h;
    const double fm = dot(seed, reference_forward(work, x));
    work.params()[k] = p;
    g[k] = (fp - fm) / (2.0 * h);
  }
  return g;
}

Matrix gauss_jordan_solve(Matrix a, Matrix b) {
  const std::size_t n = a.rows();
  if (a.cols() != n || b.rows() != n) throw std::invalid_argument("gauss_jordan_solve: shape");
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a(r, c)) > std::abs(a(piv, c))) piv = r;
    if (a(piv, c) == 0.0) throw std::domain_error("gauss_jordan_solve: singular");
    if (piv != c) {
      for (std::size_t k = 0; k < n; ++k) std::swap(a(c, k), a(piv, k));
      for (std::size_t k = 0; k < b.cols(); ++k) std::swap(b(c, k), b(piv, k));
    }
    const double inv = 1.0 / a(c, c);
    for (std::size_t k = 0; k < n; ++k) a(c, k) *= inv;
    for (std::size_t k = 0; k < b.cols(); ++k) b(c, k) *= inv;
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c || a(r, c) == 0.0) continue;
      const double f = a(r, c);
      for (std::size_t k = 0; k < n; ++k) a(r, k) -= f * a(c, k);
      for (std::size_t k = 0; k < b.cols(); ++k) b(r, k) -= f * b(c, k);
    }
  }
  return b;
}

double dense_tangent_loss(const Matrix& j, const Matrix& u) {
  const std::size_t dim = j.rows();
  const std::size_t d = j.cols();
  Matrix g(d, d);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < d; ++b)
      for (std::size_t k = 0; k < dim; ++k) g(a, b) += j(k, a) * j(k, b);
  // P_hat = J g^{-1} J^T
  const Matrix ginv_jt = gauss_jordan_solve(g, j.transpose());
  double loss = 0.0;
  for (std::size_t r = 0; r < dim; ++r) {
    for (std::size_t c = 0; c < dim; ++c) {
      double p_hat = 0.0;
      for (std::size_t a = 0; a < d; ++a) p_hat += j(r, a) * ginv_jt(a, c);
      double p = 0.0;
      for (std::size_t a = 0; a < u.cols(); ++a) p += u(r, a) * u(c, a);
      loss += (p_hat - p) * (p_hat - p);
    }
  }
  return 0.5 * loss;
}

Vector dense_hessian_contraction(const Mlp& encoder, std::span<const double> x,
                                 const Matrix& lambda) {
  const NetworkDerivatives nd = reference_derivatives(encoder, x);
  Vector out(nd.hessians.size());
  for (std::size_t j = 0; j < out.size(); ++j) {
    double s = 0.0;
    for (std::size_t a = 0; a < lambda.rows(); ++a)
      for (std::size_t b = 0; b < lambda.cols(); ++b) s += lambda(a, b) * nd.hessians[j](a, b);
    out[j] = s;
  }
  return out;
}

double rel_error(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(1.0, std::abs(b[i])));
  return worst;
}

double rel_norm_error(std::span<const double> a, std::span<const double> b, double floor) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  return norm(sub(a, b)) / std::max(norm(b), floor);
}

Vector FlatChart::decode(std::span<const double> z) const {
  Vector x(dim_, 0.0);
  x[0] = z[0];
  x[1] = z[1];
  return x;
}

Matrix FlatChart::decoder_jacobian(std::span<const double>) const {
  Matrix j(dim_, 2);
  j(0, 0) = 1.0;
  j(1, 1) = 1.0;
  return j;
}

Vector FlatChart::decoder_second_directional(std::span<const double>,
                                             std::span<const double>) const {
  return Vector(dim_, 0.0);
}

Vector FlatChart::encode(std::span<const double> x) const { return {x[0], x[1]}; }

Matrix FlatChart::encoder_jacobian(std::span<const double>) const {
  Matrix j(2, dim_);
  j(0, 0) = 1.0;
  j(1, 1) = 1.0;
  return j;
}

Vector FlatChart::encoder_hvp(std::span<const double>, std::size_t,
                              std::span<const double>) const {
  return Vector(dim_, 0.0);
}

}  // namespace geosde::oracle
