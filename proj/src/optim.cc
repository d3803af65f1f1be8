#include "wdtcn/optim.h"

#include <cmath>
#include <string>

namespace wdtcn {

void adam_step(std::span<Tensor> params, std::span<const Tensor> grads,
               AdamState& state, double lr, const AdamOptions& options) {
  if (params.size() != grads.size()) {
    throw DimensionError("adam_step: " + std::to_string(params.size()) +
                         " parameters but " + std::to_string(grads.size()) +
                         " gradients");
  }
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.push_back(Tensor::zeros(p.shape()));
      state.v.push_back(Tensor::zeros(p.shape()));
    }
  }
  if (state.m.size() != params.size()) {
    throw DimensionError("adam_step: optimizer state tracks " +
                         std::to_string(state.m.size()) + " tensors, got " +
                         std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape() != grads[i].shape() ||
        params[i].shape() != state.m[i].shape()) {
      throw DimensionError("adam_step: shape mismatch for tensor " +
                           std::to_string(i) + ": param " +
                           shape_string(params[i].shape()) + ", grad " +
                           shape_string(grads[i].shape()));
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(options.beta1, t);
  const double c2 = 1.0 - std::pow(options.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].data();
    auto g = grads[i].data();
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = options.beta1 * m[k] + (1.0 - options.beta1) * g[k];
      v[k] = options.beta2 * v[k] + (1.0 - options.beta2) * g[k] * g[k];
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      p[k] -= lr * m_hat / (std::sqrt(v_hat) + options.eps);
    }
  }
}

double clip_global_norm(std::span<Tensor> grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) sq += dot(g.data(), g.data());
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (auto& g : grads) g *= s;
  }
  return norm;
}

bool PlateauSchedule::update(double validation_loss) {
  if (validation_loss < best_) {
    best_ = validation_loss;
    bad_epochs_ = 0;
    return false;
  }
  if (++bad_epochs_ >= patience_) {
    ++halvings_;
    bad_epochs_ = 0;
    return true;
  }
  return false;
}

double PlateauSchedule::lr() const { return std::ldexp(lr_initial_, -halvings_); }

}  // namespace wdtcn
