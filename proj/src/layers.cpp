#include "dtfl/layers.hpp"

#include <algorithm>
#include <cmath>

#include "dtfl/errors.hpp"
#include "dtfl/kernels.hpp"

namespace dtfl {

DenseLayer DenseLayer::init(std::size_t in, std::size_t out, Activation act, Rng& rng) {
  if (in == 0 || out == 0) throw InputError("dense layer dimensions must be positive");
  const double bound = act == Activation::ReLU ? std::sqrt(6.0 / static_cast<double>(in))
                                               : 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  DenseLayer layer = zeros(in, out, act);
  for (double& w : layer.weights.data()) w = dist(rng);
  return layer;
}

DenseLayer DenseLayer::zeros(std::size_t in, std::size_t out, Activation act) {
  return DenseLayer{Tensor::matrix(out, in), Tensor::vector(out), act};
}

Tensor dense_forward(const DenseLayer& layer, const Tensor& x, DenseCache* cache) {
  if (x.rank() != 2 || x.cols() != layer.in_dim())
    throw DimensionError("dense_forward: input width " + std::to_string(x.cols()) +
                         " != layer input " + std::to_string(layer.in_dim()));
  Tensor pre = kernels::linear_forward(x, layer.weights, layer.bias);
  Tensor y = pre;
  if (layer.activation == Activation::ReLU)
    for (double& v : y.data()) v = v > 0.0 ? v : 0.0;
  if (cache) {
    cache->input = x;
    cache->pre_activation = std::move(pre);
  }
  return y;
}

DenseGrads dense_backward(const DenseLayer& layer, const DenseCache& cache, const Tensor& grad_out) {
  if (cache.empty()) throw StateError("dense_backward: no cached forward pass");
  if (!grad_out.same_shape(cache.pre_activation))
    throw DimensionError("dense_backward: grad_out shape does not match forward output");

  Tensor delta = grad_out;
  if (layer.activation == Activation::ReLU) {
    for (std::size_t i = 0; i < delta.size(); ++i)
      if (cache.pre_activation[i] <= 0.0) delta[i] = 0.0;
  }

  DenseGrads g;
  g.input = kernels::matmul_grad_input(delta, layer.weights);
  g.weights = kernels::matmul_grad_weight(delta, cache.input);
  g.bias = Tensor::vector(layer.out_dim());
  for (std::size_t i = 0; i < delta.rows(); ++i)
    for (std::size_t o = 0; o < delta.cols(); ++o) g.bias[o] += delta(i, o);
  return g;
}

LossAndGrad softmax_xent(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2 || logits.rows() != labels.size())
    throw DimensionError("softmax_xent: logits rows != label count");
  const std::size_t n = logits.rows();
  const std::size_t classes = logits.cols();
  LossAndGrad out{0.0, Tensor::matrix(n, classes)};
  if (n == 0) return out;

  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= classes)
      throw InputError("softmax_xent: label " + std::to_string(y) + " outside [0, " +
                       std::to_string(classes) + ")");
    auto row = logits.row(i);
    const double peak = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (double v : row) total += std::exp(v - peak);
    const double log_total = std::log(total);
    out.loss += (log_total - (row[static_cast<std::size_t>(y)] - peak)) * inv_n;
    for (std::size_t c = 0; c < classes; ++c) {
      const double p = std::exp(row[c] - peak - log_total);
      out.grad(i, c) = (p - (c == static_cast<std::size_t>(y) ? 1.0 : 0.0)) * inv_n;
    }
  }
  return out;
}

std::vector<int> argmax_rows(const Tensor& logits) {
  std::vector<int> out(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto row = logits.row(i);
    out[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

}  // namespace dtfl
