#include "dtfl/kernels.hpp"

#include <cmath>

#include "dtfl/errors.hpp"

namespace dtfl::kernels {

namespace {

bool go_parallel(Exec exec, std::size_t work) {
  return exec == Exec::Parallel && work >= kParallelThreshold;
}

void linear_row(const Tensor& x, const Tensor& w, const Tensor& b, Tensor& y, std::size_t i) {
  const std::size_t in = x.cols();
  const std::size_t out = w.rows();
  const double* xi = x.data().data() + i * in;
  for (std::size_t o = 0; o < out; ++o) {
    const double* wo = w.data().data() + o * in;
    double acc = 0.0;
    for (std::size_t k = 0; k < in; ++k) acc += xi[k] * wo[k];
    y(i, o) = acc + b[o];
  }
}

void grad_input_row(const Tensor& g, const Tensor& w, Tensor& gx, std::size_t i) {
  const std::size_t out = w.rows();
  const std::size_t in = w.cols();
  double* gxi = gx.data().data() + i * in;
  for (std::size_t o = 0; o < out; ++o) {
    const double gio = g(i, o);
    const double* wo = w.data().data() + o * in;
    for (std::size_t k = 0; k < in; ++k) gxi[k] += gio * wo[k];
  }
}

void grad_weight_row(const Tensor& g, const Tensor& x, Tensor& gw, std::size_t o) {
  const std::size_t n = x.rows();
  const std::size_t in = x.cols();
  double* gwo = gw.data().data() + o * in;
  for (std::size_t i = 0; i < n; ++i) {
    const double gio = g(i, o);
    const double* xi = x.data().data() + i * in;
    for (std::size_t k = 0; k < in; ++k) gwo[k] += gio * xi[k];
  }
}

void distance_row(const Tensor& x, Tensor& d, std::size_t i) {
  const std::size_t n = x.rows();
  const std::size_t dim = x.cols();
  for (std::size_t j = 0; j < n; ++j) {
    double acc = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      const double diff = x(i, k) - x(j, k);
      acc += diff * diff;
    }
    d(i, j) = std::sqrt(acc);
  }
}

}  // namespace

Tensor linear_forward(const Tensor& x, const Tensor& w, const Tensor& b, Exec exec) {
  if (x.rank() != 2 || w.rank() != 2 || x.cols() != w.cols() || b.size() != w.rows())
    throw DimensionError("linear_forward: shape mismatch");
  const auto n = static_cast<std::ptrdiff_t>(x.rows());
  Tensor y = Tensor::matrix(x.rows(), w.rows());
  if (go_parallel(exec, x.rows() * w.size())) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) linear_row(x, w, b, y, static_cast<std::size_t>(i));
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) linear_row(x, w, b, y, static_cast<std::size_t>(i));
  }
  return y;
}

Tensor matmul_grad_input(const Tensor& g, const Tensor& w, Exec exec) {
  if (g.rank() != 2 || w.rank() != 2 || g.cols() != w.rows())
    throw DimensionError("matmul_grad_input: shape mismatch");
  const auto n = static_cast<std::ptrdiff_t>(g.rows());
  Tensor gx = Tensor::matrix(g.rows(), w.cols());
  if (go_parallel(exec, g.rows() * w.size())) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) grad_input_row(g, w, gx, static_cast<std::size_t>(i));
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) grad_input_row(g, w, gx, static_cast<std::size_t>(i));
  }
  return gx;
}

Tensor matmul_grad_weight(const Tensor& g, const Tensor& x, Exec exec) {
  if (g.rank() != 2 || x.rank() != 2 || g.rows() != x.rows())
    throw DimensionError("matmul_grad_weight: shape mismatch");
  const auto out = static_cast<std::ptrdiff_t>(g.cols());
  Tensor gw = Tensor::matrix(g.cols(), x.cols());
  if (go_parallel(exec, g.size() * x.cols())) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t o = 0; o < out; ++o) grad_weight_row(g, x, gw, static_cast<std::size_t>(o));
  } else {
    for (std::ptrdiff_t o = 0; o < out; ++o) grad_weight_row(g, x, gw, static_cast<std::size_t>(o));
  }
  return gw;
}

Tensor pairwise_distances(const Tensor& x, Exec exec) {
  if (x.rank() != 2) throw DimensionError("pairwise_distances: expected a matrix");
  const auto n = static_cast<std::ptrdiff_t>(x.rows());
  Tensor d = Tensor::matrix(x.rows(), x.rows());
  if (go_parallel(exec, x.rows() * x.size())) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) distance_row(x, d, static_cast<std::size_t>(i));
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) distance_row(x, d, static_cast<std::size_t>(i));
  }
  return d;
}

}  // namespace dtfl::kernels
