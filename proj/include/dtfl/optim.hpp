#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dtfl/tensor.hpp"

namespace dtfl {

enum class OptimKind { SGD, Adam };

struct OptimConfig {
  OptimKind kind = OptimKind::Adam;
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// SGD or bias-corrected Adam over a fixed, ordered list of parameters. Adam
/// moments are created zeroed on the first step and matched to parameters by
/// position, so callers must pass the same parameter order every step.
class Optimizer {
 public:
  explicit Optimizer(OptimConfig config);

  /// Throws NumericError (leaving every parameter untouched) if any gradient
  /// entry is non-finite.
  void step(std::span<Tensor* const> params, std::span<const Tensor* const> grads);

  const OptimConfig& config() const noexcept { return config_; }
  std::uint64_t steps() const noexcept { return steps_; }

 private:
  OptimConfig config_;
  std::uint64_t steps_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

}  // namespace dtfl
