#pragma once

#include "cosearch/autodiff/tape.hpp"

#include <cstdint>
#include <vector>

namespace cosearch::ad {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Decoupled (AdamW-style): p -= lr * weight_decay * p every step.
  double weight_decay = 0.0;
};

struct AdamState {
  std::int64_t t = 0;
  std::vector<Tensor4> m;
  std::vector<Tensor4> v;
};

class Adam {
 public:
  Adam(std::vector<Var> params, AdamConfig cfg);

  // Applies one update from the parameters' accumulated gradients (missing
  // gradients count as zero). Does not clear them.
  void step();
  void zero_grad();

  const AdamConfig& config() const { return cfg_; }
  const AdamState& state() const { return state_; }
  const std::vector<Var>& params() const { return params_; }

 private:
  std::vector<Var> params_;
  AdamConfig cfg_;
  AdamState state_;
};

}  // namespace cosearch::ad
