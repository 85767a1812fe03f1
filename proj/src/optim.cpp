#include "dtfl/optim.hpp"

#include <cmath>

#include "dtfl/errors.hpp"

namespace dtfl {

Optimizer::Optimizer(OptimConfig config) : config_(config) {
  if (!(config_.learning_rate >= 0.0) || !std::isfinite(config_.learning_rate))
    throw InputError("learning rate must be finite and non-negative");
  if (config_.kind == OptimKind::Adam &&
      !(config_.beta1 >= 0.0 && config_.beta1 < 1.0 && config_.beta2 >= 0.0 && config_.beta2 < 1.0 &&
        config_.epsilon > 0.0))
    throw InputError("Adam requires betas in [0,1) and epsilon > 0");
}

void Optimizer::step(std::span<Tensor* const> params, std::span<const Tensor* const> grads) {
  if (params.size() != grads.size()) throw DimensionError("optimizer: params/grads count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->same_shape(*grads[i])) throw DimensionError("optimizer: param/grad shape mismatch");
    if (!grads[i]->all_finite()) throw NumericError("optimizer: non-finite gradient");
  }
  if (!m_.empty() && m_.size() != params.size())
    throw DimensionError("optimizer: parameter list changed between steps");

  ++steps_;
  const double lr = config_.learning_rate;
  if (config_.kind == OptimKind::SGD) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto p = params[i]->data();
      auto g = grads[i]->data();
      for (std::size_t j = 0; j < p.size(); ++j) p[j] -= lr * g[j];
    }
    return;
  }

  if (m_.empty()) {
    for (const Tensor* p : params) {
      m_.emplace_back(p->shape(), 0.0);
      v_.emplace_back(p->shape(), 0.0);
    }
  }
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(b1, t);
  const double c2 = 1.0 - std::pow(b2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->data();
    auto g = grads[i]->data();
    auto m = m_[i].data();
    auto v = v_[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = b1 * m[j] + (1.0 - b1) * g[j];
      v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      p[j] -= lr * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
}

}  // namespace dtfl
