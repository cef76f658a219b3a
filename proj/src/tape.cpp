#include "nextpoi/tape.hpp"

#include <stdexcept>

#include "nextpoi/types.hpp"

namespace nextpoi::num {

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Tensor value) { return record(std::move(value), nullptr); }

Var Tape::param(const Tensor& value, Tensor* grad_sink) {
  if (grad_sink != nullptr && grad_sink->shape() != value.shape()) {
    throw std::invalid_argument("Tape::param: sink shape " + grad_sink->shape().to_string() +
                                " vs value " + value.shape().to_string());
  }
  auto& node = nodes_.emplace_back();
  node.borrowed = &value;
  node.sink = grad_sink;
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, BackwardFn backward) {
#ifndef NDEBUG
  if (!value.all_finite()) throw NumericalError("non-finite value produced on tape");
#endif
  auto& node = nodes_.emplace_back();
  node.owned = std::move(value);
  node.backward = std::move(backward);
  return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::value(std::size_t id) const {
  const auto& node = nodes_.at(id);
  return node.borrowed != nullptr ? *node.borrowed : *node.owned;
}

Tensor& Tape::grad_accumulator(std::size_t id) {
  auto& node = nodes_.at(id);
  if (!node.grad) node.grad.emplace(value(id).shape());
  return *node.grad;
}

const Tensor* Tape::grad(Var v) const {
  const auto& node = nodes_.at(v.id());
  return node.grad ? &*node.grad : nullptr;
}

void Tape::backward(Var loss) {
  if (backward_done_) throw std::logic_error("Tape::backward called twice without a new forward");
  if (loss.valid() && &loss.tape() != this) throw std::invalid_argument("loss belongs to another tape");
  const auto& lv = value(loss.id());
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw std::invalid_argument("Tape::backward: loss must be 1x1, got " + lv.shape().to_string());
  }
  backward_done_ = true;
  grad_accumulator(loss.id())[0] += 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    auto& node = nodes_[i];
    if (!node.grad) continue;
    if (node.backward) node.backward(*this, i);
    if (node.sink != nullptr) *node.sink += *node.grad;
  }
}

}  // namespace nextpoi::num
