#pragma once

// Shared helpers for the test binaries: random inputs and the independent
// oracles (naive loops, central differences) the library is checked against.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "dtfl/rng.hpp"
#include "dtfl/tensor.hpp"

namespace testing {

using dtfl::Rng;
using dtfl::Tensor;

inline Tensor random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Tensor t = Tensor::matrix(rows, cols);
  for (double& v : t.data()) v = n(rng);
  return t;
}

inline Tensor random_vector(std::size_t n, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Tensor t = Tensor::vector(n);
  for (double& v : t.data()) v = d(rng);
  return t;
}

/// out[i,o] = sum_k x[i,k] * w[o,k], accumulated in the textbook loop order.
inline Tensor naive_xwt(const Tensor& x, const Tensor& w) {
  Tensor out = Tensor::matrix(x.rows(), w.rows());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t o = 0; o < w.rows(); ++o) {
      long double acc = 0.0L;
      for (std::size_t k = 0; k < x.cols(); ++k) acc += static_cast<long double>(x(i, k)) * w(o, k);
      out(i, o) = static_cast<double>(acc);
    }
  return out;
}

/// Central differences of a scalar function with respect to every entry of `param`.
inline Tensor numeric_grad(const std::function<double()>& f, Tensor& param, double h = 1e-6) {
  Tensor g(param.shape());
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double keep = param[i];
    param[i] = keep + h;
    const double up = f();
    param[i] = keep - h;
    const double down = f();
    param[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// max |a - b| / max(max |a|, max |b|, floor): a relative error on the scale of the gradient.
inline double rel_err(const Tensor& a, const Tensor& b, double floor = 1e-8) {
  double diff = 0.0;
  double scale = floor;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
  }
  return diff / scale;
}

/// Sum of elementwise products, the scalar loss used to probe backward passes.
inline double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace testing
