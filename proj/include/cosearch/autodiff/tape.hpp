#pragma once

#include "cosearch/autodiff/tensor.hpp"

#include <functional>
#include <memory>
#include <vector>

namespace cosearch::ad {

struct Node {
  Tensor4 value;
  Tensor4 grad;  // empty until first accumulation
  bool requires_grad = false;

  // Zero-initialized on first use.
  Tensor4& grad_buffer();
  void zero_grad() { grad = Tensor4(); }
};

using Var = std::shared_ptr<Node>;

Var constant(Tensor4 value);
Var parameter(Tensor4 value);

// Reverse-mode tape. Every op appends its backward closure in execution
// order; backward() runs them last to first. A tape is rebuilt for every
// forward pass and is not shared between threads.
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  bool recording() const { return recording_; }
  // True when the op's output must be differentiable.
  bool tracks(std::initializer_list<const Var*> inputs) const;

  void push(std::function<void()> backward) { closures_.push_back(std::move(backward)); }
  std::size_t size() const { return closures_.size(); }

  // Seeds d(loss)/d(loss) = 1 for a single-element loss and propagates.
  void backward(const Var& loss);

 private:
  bool recording_;
  std::vector<std::function<void()>> closures_;
};

}  // namespace cosearch::ad
