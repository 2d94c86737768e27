#include "cosearch/autodiff/adam.hpp"

#include <cmath>

namespace cosearch::ad {

Adam::Adam(std::vector<Var> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  for (const auto& p : params_) {
    state_.m.emplace_back(p->value.dims(), 0.0);
    state_.v.emplace_back(p->value.dims(), 0.0);
  }
}

void Adam::step() {
  ++state_.t;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(state_.t));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(state_.t));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor4& value = params_[k]->value;
    const Tensor4& grad = params_[k]->grad;
    Tensor4& m = state_.m[k];
    Tensor4& v = state_.v[k];
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad.empty() ? 0.0 : grad[i];
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
      const double update = (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg_.eps);
      value[i] -= cfg_.lr * (update + cfg_.weight_decay * value[i]);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

}  // namespace cosearch::ad
