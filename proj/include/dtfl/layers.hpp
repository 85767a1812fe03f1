#pragma once

#include <cstddef>
#include <span>

#include "dtfl/rng.hpp"
#include "dtfl/tensor.hpp"

namespace dtfl {

enum class Activation { ReLU, Identity };

struct DenseLayer {
  Tensor weights;  // out x in
  Tensor bias;     // out
  Activation activation = Activation::Identity;

  std::size_t in_dim() const noexcept { return weights.cols(); }
  std::size_t out_dim() const noexcept { return weights.rows(); }
  std::size_t parameter_count() const noexcept { return weights.size() + bias.size(); }

  /// Uniform fan-in initialization: bound sqrt(6/in) for ReLU layers and
  /// 1/sqrt(in) for linear heads. Biases start at zero.
  static DenseLayer init(std::size_t in, std::size_t out, Activation act, Rng& rng);
  static DenseLayer zeros(std::size_t in, std::size_t out, Activation act);
};

/// What a forward pass keeps for the matching backward pass.
struct DenseCache {
  Tensor input;
  Tensor pre_activation;
  bool empty() const noexcept { return pre_activation.empty(); }
};

struct DenseGrads {
  Tensor input;
  Tensor weights;
  Tensor bias;
};

/// y = act(x W^T + b). Fills `cache` when given.
Tensor dense_forward(const DenseLayer& layer, const Tensor& x, DenseCache* cache = nullptr);

/// Analytic gradients of a dense layer. Throws StateError on an empty cache.
DenseGrads dense_backward(const DenseLayer& layer, const DenseCache& cache, const Tensor& grad_out);

struct LossAndGrad {
  double loss = 0.0;
  Tensor grad;
};

/// Mean softmax cross-entropy over the batch and its gradient w.r.t. logits,
/// (softmax - onehot) / batch. An empty batch has loss 0.
LossAndGrad softmax_xent(const Tensor& logits, std::span<const int> labels);

/// Index of the largest logit per row.
std::vector<int> argmax_rows(const Tensor& logits);

}  // namespace dtfl
