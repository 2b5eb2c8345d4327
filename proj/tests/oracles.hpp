#pragma once
// Brute-force reference implementations. Plain loops over Tensor entries,
// deliberately sharing no code with the library ops they check.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "tcgu/numerics/tensor.hpp"

namespace tcgu::oracle {

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  Tensor c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k)
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += a(i, k) * b(k, j);
  return c;
}

inline double frob2(const Tensor& a) {
  double s = 0;
  for (double v : a.data()) s += v * v;
  return s;
}

inline Tensor minus(const Tensor& a, const Tensor& b) {
  Tensor c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] -= b.data()[i];
  return c;
}

/// Dense (wI + D)^-1/2 (wI + A) (wI + D)^-1/2.
inline Tensor normalized(const Tensor& a, double w) {
  const std::size_t n = a.rows();
  std::vector<double> d(n, w);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) d[i] += a(i, j);
  Tensor p(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) p(i, j) = (a(i, j) + (i == j ? w : 0.0)) / std::sqrt(d[i] * d[j]);
  return p;
}

inline std::vector<std::size_t> members(std::span<const int> labels, std::span<const std::size_t> rows, int c) {
  std::vector<std::size_t> out;
  for (std::size_t r : rows)
    if (labels[r] == c) out.push_back(r);
  return out;
}

inline std::vector<double> class_mean(const Tensor& h, const std::vector<std::size_t>& idx) {
  std::vector<double> mu(h.cols(), 0.0);
  for (std::size_t r : idx)
    for (std::size_t j = 0; j < h.cols(); ++j) mu[j] += h(r, j);
  for (double& v : mu) v /= static_cast<double>(idx.size());
  return mu;
}

/// Sample covariance with divisor n-1; zero for a single row.
inline Tensor class_cov(const Tensor& h, const std::vector<std::size_t>& idx) {
  const std::size_t f = h.cols();
  Tensor u(f, f);
  if (idx.size() < 2) return u;
  const auto mu = class_mean(h, idx);
  for (std::size_t r : idx)
    for (std::size_t a = 0; a < f; ++a)
      for (std::size_t b = 0; b < f; ++b) u(a, b) += (h(r, a) - mu[a]) * (h(r, b) - mu[b]);
  for (double& v : u.data()) v /= static_cast<double>(idx.size() - 1);
  return u;
}

/// Term-by-term feature alignment loss. Condensed classes with one node are
/// skipped in the covariance part.
struct FeatLoss {
  double mean = 0;
  double cov = 0;
};

inline FeatLoss feat_loss(const std::vector<Tensor>& h_real, std::span<const int> y_real,
                          std::span<const std::size_t> rows_real, const std::vector<Tensor>& h_cond,
                          std::span<const int> y_cond, int classes) {
  std::vector<std::size_t> rows_cond(y_cond.size());
  for (std::size_t i = 0; i < rows_cond.size(); ++i) rows_cond[i] = i;
  FeatLoss out;
  for (std::size_t k = 0; k < h_real.size(); ++k) {
    for (int c = 0; c < classes; ++c) {
      const auto mr = members(y_real, rows_real, c);
      const auto mc = members(y_cond, rows_cond, c);
      const double r = static_cast<double>(mr.size()) / static_cast<double>(rows_real.size());
      const auto a = class_mean(h_real[k], mr);
      const auto b = class_mean(h_cond[k], mc);
      for (std::size_t j = 0; j < a.size(); ++j) out.mean += r * (a[j] - b[j]) * (a[j] - b[j]);
      if (mc.size() >= 2) out.cov += r * frob2(minus(class_cov(h_real[k], mr), class_cov(h_cond[k], mc)));
    }
  }
  return out;
}

/// Pairwise topology MLP evaluated one pair at a time on [x_i; x_j].
/// phi = [W1a, W1b, b1, W2, b2, W3, b3].
inline Tensor topology(const std::vector<Tensor>& phi, const Tensor& x) {
  const std::size_t n = x.rows(), f = x.cols(), h = phi[0].cols();
  auto mlp = [&](std::size_t i, std::size_t j) {
    std::vector<double> z(2 * f);
    for (std::size_t a = 0; a < f; ++a) {
      z[a] = x(i, a);
      z[f + a] = x(j, a);
    }
    std::vector<double> h1(h), h2(h);
    for (std::size_t o = 0; o < h; ++o) {
      double s = phi[2](0, o);
      for (std::size_t a = 0; a < f; ++a) s += z[a] * phi[0](a, o) + z[f + a] * phi[1](a, o);
      h1[o] = s > 0 ? s : 0;
    }
    for (std::size_t o = 0; o < h; ++o) {
      double s = phi[4](0, o);
      for (std::size_t a = 0; a < h; ++a) s += h1[a] * phi[3](a, o);
      h2[o] = s > 0 ? s : 0;
    }
    double s = phi[6](0, 0);
    for (std::size_t a = 0; a < h; ++a) s += h2[a] * phi[5](a, 0);
    return s;
  };
  Tensor out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) = 1.0 / (1.0 + std::exp(-(mlp(i, j) + mlp(j, i)) / 2));
  return out;
}

/// Both sides of the gradient-matching bound for an SGC relay with MSE
/// loss: lhs is the class-wise gradient discrepancy, rhs the mean term plus
/// the second-moment term times ||Theta||^2.
struct GmBound {
  double lhs = 0;
  double rhs = 0;
};

inline GmBound gradient_matching_bound(const Tensor& h, std::span<const int> y, const Tensor& hp,
                                       std::span<const int> yp, const Tensor& theta, int classes) {
  const std::size_t f = h.cols(), c_out = theta.cols();
  GmBound out;
  double theta2 = frob2(theta);
  auto per_class = [&](const Tensor& hh, std::span<const int> yy, int c, Tensor& grad, Tensor& hty, Tensor& hth) {
    std::size_t n = 0;
    grad = Tensor(f, c_out);
    hty = Tensor(f, c_out);
    hth = Tensor(f, f);
    for (std::size_t r = 0; r < hh.rows(); ++r) {
      if (yy[r] != c) continue;
      ++n;
      for (std::size_t o = 0; o < c_out; ++o) {
        double z = 0;
        for (std::size_t a = 0; a < f; ++a) z += hh(r, a) * theta(a, o);
        const double resid = z - (static_cast<int>(o) == c ? 1.0 : 0.0);
        for (std::size_t a = 0; a < f; ++a) grad(a, o) += hh(r, a) * resid;
      }
      for (std::size_t a = 0; a < f; ++a) {
        hty(a, static_cast<std::size_t>(c)) += hh(r, a);
        for (std::size_t b = 0; b < f; ++b) hth(a, b) += hh(r, a) * hh(r, b);
      }
    }
    const double inv = 1.0 / static_cast<double>(n);
    for (double& v : grad.data()) v *= inv;
    for (double& v : hty.data()) v *= inv;
    for (double& v : hth.data()) v *= inv;
  };
  for (int c = 0; c < classes; ++c) {
    Tensor g1, m1, s1, g2, m2, s2;
    per_class(h, y, c, g1, m1, s1);
    per_class(hp, yp, c, g2, m2, s2);
    out.lhs += frob2(minus(g1, g2));
    out.rhs += frob2(minus(m1, m2)) + frob2(minus(s1, s2)) * theta2;
  }
  return out;
}

inline double cosine(const Tensor& a, std::size_t i, const Tensor& b, std::size_t j) {
  double d = 0, na = 0, nb = 0;
  for (std::size_t k = 0; k < a.cols(); ++k) {
    d += a(i, k) * b(j, k);
    na += a(i, k) * a(i, k);
    nb += b(j, k) * b(j, k);
  }
  return na == 0 || nb == 0 ? 0.0 : d / std::sqrt(na * nb);
}

/// Prototype c = mean embedding of rows labelled c.
inline Tensor prototypes(const Tensor& z, std::span<const int> y, std::span<const std::size_t> rows, int classes) {
  Tensor p(static_cast<std::size_t>(classes), z.cols());
  for (int c = 0; c < classes; ++c) {
    const auto mu = class_mean(z, members(y, rows, c));
    for (std::size_t j = 0; j < mu.size(); ++j) p(static_cast<std::size_t>(c), j) = mu[j];
  }
  return p;
}

inline Tensor similarity(const Tensor& z, const Tensor& protos, double tau) {
  Tensor s(z.rows(), protos.rows());
  for (std::size_t i = 0; i < z.rows(); ++i)
    for (std::size_t c = 0; c < protos.rows(); ++c) s(i, c) = std::exp(cosine(z, i, protos, c) / tau);
  return s;
}

inline double sdm(const Tensor& s_r, std::span<const int> y_r, std::span<const std::size_t> rows_r, const Tensor& s_u,
                  std::span<const int> y_u, std::span<const double> ratios) {
  std::vector<std::size_t> all(y_u.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  double out = 0;
  for (std::size_t c = 0; c < ratios.size(); ++c) {
    const auto a = class_mean(s_r, members(y_r, rows_r, static_cast<int>(c)));
    const auto b = class_mean(s_u, members(y_u, all, static_cast<int>(c)));
    for (std::size_t j = 0; j < a.size(); ++j) out += ratios[c] * (a[j] - b[j]) * (a[j] - b[j]);
  }
  return out;
}

/// Contrastive regulariser with self excluded from both the positives and
/// the denominator.
inline double cdr(const Tensor& z, std::span<const int> y, double tau, bool log_form) {
  const std::size_t n = z.rows();
  double out = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double denom = 0;
    for (std::size_t q = 0; q < n; ++q)
      if (q != i) denom += std::exp(cosine(z, i, z, q) / tau);
    double acc = 0;
    std::size_t peers = 0;
    for (std::size_t p = 0; p < n; ++p) {
      if (p == i || y[p] != y[i]) continue;
      ++peers;
      const double r = std::exp(cosine(z, i, z, p) / tau) / denom;
      acc += log_form ? std::log(r) : r;
    }
    if (peers > 0) out -= acc / static_cast<double>(peers);
  }
  return out;
}

}  // namespace tcgu::oracle
