#include "nextpoi/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nextpoi::num {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult compare_with_finite_differences(const std::function<double()>& eval, Tensor& x,
                                                const Tensor& analytic, double eps,
                                                std::span<const std::size_t> coords) {
  if (analytic.shape() != x.shape()) {
    throw std::invalid_argument("grad check: analytic gradient shape " + analytic.shape().to_string() +
                                " vs parameter " + x.shape().to_string());
  }
  GradCheckResult result;
  auto check = [&](std::size_t i) {
    const double saved = x[i];
    x[i] = saved + eps;
    const double up = eval();
    x[i] = saved - eps;
    const double down = eval();
    x[i] = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double err = relative_error(analytic[i], numeric);
    ++result.checked;
    if (err > result.max_relative_error || result.checked == 1) {
      result.max_relative_error = err;
      result.worst_index = i;
      result.analytic = analytic[i];
      result.numeric = numeric;
    }
  };
  if (coords.empty()) {
    for (std::size_t i = 0; i < x.size(); ++i) check(i);
  } else {
    for (auto i : coords) check(i);
  }
  return result;
}

GradCheckResult grad_check(const std::function<Var(Tape&, Var)>& f, const Tensor& x, double eps) {
  Tensor point = x;
  Tensor analytic(x.shape());
  {
    Tape tape;
    const auto in = tape.param(point, &analytic);
    tape.backward(f(tape, in));
  }
  auto eval = [&] {
    Tape tape;
    const auto in = tape.param(point, nullptr);
    return f(tape, in).value().item();
  };
  return compare_with_finite_differences(eval, point, analytic, eps);
}

}  // namespace nextpoi::num
