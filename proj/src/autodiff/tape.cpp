#include "cosearch/autodiff/tape.hpp"

#include "cosearch/core/errors.hpp"

namespace cosearch::ad {

Tensor4& Node::grad_buffer() {
  if (grad.empty() && value.size() > 0) grad = Tensor4(value.dims(), 0.0);
  return grad;
}

Var constant(Tensor4 value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return n;
}

Var parameter(Tensor4 value) {
  auto n = constant(std::move(value));
  n->requires_grad = true;
  return n;
}

bool Tape::tracks(std::initializer_list<const Var*> inputs) const {
  if (!recording_) return false;
  for (const Var* v : inputs)
    if (v && *v && (*v)->requires_grad) return true;
  return false;
}

void Tape::backward(const Var& loss) {
  if (loss->value.size() != 1) throw ShapeError("Tape::backward: loss must have one element");
  loss->grad_buffer()[0] += 1.0;
  for (auto it = closures_.rbegin(); it != closures_.rend(); ++it) (*it)();
}

}  // namespace cosearch::ad
