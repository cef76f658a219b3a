#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "nextpoi/tensor.hpp"

namespace nextpoi::num {

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }
  const Tensor& value() const;
  Shape shape() const { return value().shape(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode gradient tape.
///
/// Nodes are appended in evaluation order, so the tape is topologically
/// sorted by construction. A tape supports a single backward pass; build a
/// new one for the next forward.
///
/// Parameters are borrowed, not copied: `param` records a pointer to the
/// caller's tensor and, on backward, adds the node's gradient into an
/// optional caller-owned sink of the same shape.
class Tape {
 public:
  /// Accumulates into grad(inputs) given grad(self).
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var param(const Tensor& value, Tensor* grad_sink);

  /// Appends an op result. Kernel implementations only.
  Var record(Tensor value, BackwardFn backward);

  const Tensor& value(std::size_t id) const;
  const Tensor& value(Var v) const { return value(v.id()); }

  /// Gradient buffer of a node, zero-initialized on first access.
  Tensor& grad_accumulator(std::size_t id);

  /// Gradient reached during backward, or nullptr if none flowed to `v`.
  const Tensor* grad(Var v) const;

  /// Seeds d(loss)/d(loss) = 1 and propagates to every node. `loss` must be
  /// 1 x 1. Throws std::logic_error if called twice on the same tape.
  void backward(Var loss);

  bool backward_done() const { return backward_done_; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    std::optional<Tensor> owned;
    const Tensor* borrowed = nullptr;
    Tensor* sink = nullptr;
    std::optional<Tensor> grad;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace nextpoi::num
