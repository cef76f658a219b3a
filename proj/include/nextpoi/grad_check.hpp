#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "nextpoi/tape.hpp"
#include "nextpoi/tensor.hpp"

namespace nextpoi::num {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;  // at worst_index
  double numeric = 0.0;   // at worst_index
  std::size_t checked = 0;
};

/// |a - n| / max(|a|, |n|, 1e-8)
double relative_error(double analytic, double numeric);

/// Central differences of a scalar function `eval` that reads `x`, which is
/// perturbed in place and restored. `coords` selects entries (all if empty).
GradCheckResult compare_with_finite_differences(const std::function<double()>& eval, Tensor& x,
                                                const Tensor& analytic, double eps = 1e-5,
                                                std::span<const std::size_t> coords = {});

/// Checks reverse-mode gradients of `f` at `x` against central differences.
/// `f` builds its scalar output on the tape it is handed from the input Var.
GradCheckResult grad_check(const std::function<Var(Tape&, Var)>& f, const Tensor& x,
                           double eps = 1e-5);

}  // namespace nextpoi::num
