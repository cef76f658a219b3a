#include "nextpoi/ops.hpp"

#include "nextpoi/types.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace nextpoi::num {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMat> view(const Tensor& t) {
  return {t.data().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())};
}

Eigen::Map<RowMat> view(Tensor& t) {
  return {t.data().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())};
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " + a.to_string() +
                              " and " + b.to_string());
}

void same_tape(Var a, Var b, const char* op) {
  if (&a.tape() != &b.tape()) throw std::invalid_argument(std::string(op) + ": operands on different tapes");
}

void require_same_shape(Var a, Var b, const char* op) {
  same_tape(a, b, op);
  if (a.shape() != b.shape()) shape_error(op, a.shape(), b.shape());
}

template <class F>
Var elementwise(Var a, F&& f, std::function<double(double x, double y)> dydx) {
  Tensor out(a.shape());
  const auto& x = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x[i]);
  const auto in = a.id();
  return a.tape().record(std::move(out), [in, dydx = std::move(dydx)](Tape& t, std::size_t self) {
    const auto& g = t.grad_accumulator(self);
    const auto& x = t.value(in);
    const auto& y = t.value(self);
    auto& gx = t.grad_accumulator(in);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * dydx(x[i], y[i]);
  });
}

}  // namespace

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

std::vector<double> softmax(std::span<const double> v, std::span<const std::uint8_t> valid) {
  if (!valid.empty() && valid.size() != v.size()) {
    throw std::invalid_argument("softmax: mask length mismatch");
  }
  auto ok = [&](std::size_t i) { return valid.empty() || valid[i]; };
  double max = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!ok(i)) continue;
    if (std::isnan(v[i]) || v[i] == std::numeric_limits<double>::infinity()) {
      throw NumericalError("softmax: non-finite input at position " + std::to_string(i));
    }
    max = std::max(max, v[i]);
  }
  std::vector<double> out(v.size(), 0.0);
  if (max == -std::numeric_limits<double>::infinity()) {
    if (std::none_of(valid.begin(), valid.end(), [](std::uint8_t m) { return m != 0; }) && !valid.empty()) {
      throw std::invalid_argument("softmax: every position is masked");
    }
    if (v.empty()) throw std::invalid_argument("softmax: empty input");
    throw NumericalError("softmax: every unmasked input is -inf");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (ok(i)) {
      out[i] = std::exp(v[i] - max);
      total += out[i];
    }
  }
  for (auto& o : out) o /= total;
  return out;
}

std::vector<double> layer_norm(std::span<const double> x, std::span<const double> gain,
                               std::span<const double> bias, double eps) {
  const std::size_t n = x.size();
  if (n < 2 || gain.size() != n || bias.size() != n) {
    throw std::invalid_argument("layer_norm: need dim >= 2 and matching gain/bias");
  }
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  const double inv = 1.0 / std::sqrt(var + eps);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = (x[i] - mean) * inv * gain[i] + bias[i];
  return out;
}

Var matmul(Var a, Var b) {
  same_tape(a, b, "matmul");
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.cols() != bv.rows()) shape_error("matmul", av.shape(), bv.shape());
  Tensor out(av.rows(), bv.cols());
  view(out).noalias() = view(av) * view(bv);
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), [ia, ib](Tape& t, std::size_t self) {
    const auto g = view(t.grad_accumulator(self));
    {
      auto ga = view(t.grad_accumulator(ia));
      ga.noalias() += g * view(t.value(ib)).transpose();
    }
    auto gb = view(t.grad_accumulator(ib));
    gb.noalias() += view(t.value(ia)).transpose() * g;
  });
}

Var transpose(Var a) {
  const auto& av = a.value();
  Tensor out(av.cols(), av.rows());
  view(out) = view(av).transpose();
  const auto ia = a.id();
  return a.tape().record(std::move(out), [ia](Tape& t, std::size_t self) {
    view(t.grad_accumulator(ia)) += view(t.grad_accumulator(self)).transpose();
  });
}

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  out += b.value();
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), [ia, ib](Tape& t, std::size_t self) {
    const auto& g = t.grad_accumulator(self);
    t.grad_accumulator(ia) += g;
    t.grad_accumulator(ib) += g;
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), [ia, ib](Tape& t, std::size_t self) {
    const auto& g = t.grad_accumulator(self);
    t.grad_accumulator(ia) += g;
    auto& gb = t.grad_accumulator(ib);
    for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
  });
}

Var add_row(Var a, Var row) {
  same_tape(a, row, "add_row");
  const auto& av = a.value();
  const auto& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != av.cols()) shape_error("add_row", av.shape(), rv.shape());
  Tensor out = av;
  view(out).rowwise() += view(rv).row(0);
  const auto ia = a.id(), ir = row.id();
  return a.tape().record(std::move(out), [ia, ir](Tape& t, std::size_t self) {
    const auto& g = t.grad_accumulator(self);
    t.grad_accumulator(ia) += g;
    view(t.grad_accumulator(ir)).row(0) += view(g).colwise().sum();
  });
}

Var scale(Var a, double s) {
  Tensor out = a.value();
  for (auto& v : out.data()) v *= s;
  const auto ia = a.id();
  return a.tape().record(std::move(out), [ia, s](Tape& t, std::size_t self) {
    const auto& g = t.grad_accumulator(self);
    auto& ga = t.grad_accumulator(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
  });
}

Var hadamard(Var a, Var b) {
  require_same_shape(a, b, "hadamard");
  Tensor out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), [ia, ib](Tape& t, std::size_t self) {
    const auto& g = t.grad_accumulator(self);
    const auto& av = t.value(ia);
    const auto& bv = t.value(ib);
    {
      auto& ga = t.grad_accumulator(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    auto& gb = t.grad_accumulator(ib);
    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
  });
}

Var sigmoid(Var a) {
  return elementwise(a, [](double x) { return sigmoid(x); },
                     [](double, double y) { return y * (1.0 - y); });
}

Var relu(Var a) {
  return elementwise(a, [](double x) { return x > 0.0 ? x : 0.0; },
                     [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var softplus(Var a) {
  return elementwise(a, [](double x) { return softplus(x); },
                     [](double x, double) { return sigmoid(x); });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const std::size_t rows = parts.front().shape().rows;
  std::size_t cols = 0;
  for (const auto& p : parts) {
    same_tape(parts.front(), p, "concat_cols");
    if (p.shape().rows != rows) shape_error("concat_cols", parts.front().shape(), p.shape());
    cols += p.shape().cols;
  }
  Tensor out(rows, cols);
  std::vector<std::size_t> ids, offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const auto& pv = p.value();
    view(out).middleCols(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(pv.cols())) = view(pv);
    ids.push_back(p.id());
    offsets.push_back(offset);
    offset += pv.cols();
  }
  return parts.front().tape().record(
      std::move(out), [ids = std::move(ids), offsets = std::move(offsets)](Tape& t, std::size_t self) {
        const auto& g = t.grad_accumulator(self);
        for (std::size_t k = 0; k < ids.size(); ++k) {
          auto& gp = t.grad_accumulator(ids[k]);
          view(gp) += view(g).middleCols(static_cast<Eigen::Index>(offsets[k]),
                                         static_cast<Eigen::Index>(gp.cols()));
        }
      });
}

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  const auto& av = a.value();
  if (begin + count > av.cols()) {
    throw std::invalid_argument("slice_cols: columns [" + std::to_string(begin) + ", " +
                                std::to_string(begin + count) + ") out of " + av.shape().to_string());
  }
  Tensor out(av.rows(), count);
  view(out) = view(av).middleCols(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(count));
  const auto ia = a.id();
  return a.tape().record(std::move(out), [ia, begin, count](Tape& t, std::size_t self) {
    view(t.grad_accumulator(ia)).middleCols(static_cast<Eigen::Index>(begin),
                                            static_cast<Eigen::Index>(count)) +=
        view(t.grad_accumulator(self));
  });
}

std::vector<Var> split_heads(Var a, std::size_t heads) {
  const auto cols = a.shape().cols;
  if (heads == 0 || cols % heads != 0) {
    throw std::invalid_argument("split_heads: " + std::to_string(cols) + " columns not divisible into " +
                                std::to_string(heads) + " heads");
  }
  const auto width = cols / heads;
  std::vector<Var> out;
  out.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) out.push_back(slice_cols(a, h * width, width));
  return out;
}

Var pad_rows(Var a, std::size_t rows) {
  const auto& av = a.value();
  if (rows < av.rows()) {
    throw std::invalid_argument("pad_rows: target " + std::to_string(rows) + " rows < " + av.shape().to_string());
  }
  Tensor out(rows, av.cols());
  std::copy(av.data().begin(), av.data().end(), out.data().begin());
  const auto ia = a.id();
  return a.tape().record(std::move(out), [ia](Tape& t, std::size_t self) {
    const auto& g = t.grad_accumulator(self);
    auto& ga = t.grad_accumulator(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  const auto ia = a.id();
  return a.tape().record(Tensor::scalar(s), [ia](Tape& t, std::size_t self) {
    const double g = t.grad_accumulator(self)[0];
    for (auto& v : t.grad_accumulator(ia).data()) v += g;
  });
}

Var dot(Var a, Var b) {
  require_same_shape(a, b, "dot");
  const auto& av = a.value();
  const auto& bv = b.value();
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) s += av[i] * bv[i];
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(Tensor::scalar(s), [ia, ib](Tape& t, std::size_t self) {
    const double g = t.grad_accumulator(self)[0];
    const auto& av = t.value(ia);
    const auto& bv = t.value(ib);
    {
      auto& ga = t.grad_accumulator(ia);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g * bv[i];
    }
    auto& gb = t.grad_accumulator(ib);
    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g * av[i];
  });
}

Var sum_squares(Var a) {
  const double s = a.value().squared_norm();
  const auto ia = a.id();
  return a.tape().record(Tensor::scalar(s), [ia](Tape& t, std::size_t self) {
    const double g = t.grad_accumulator(self)[0];
    const auto& av = t.value(ia);
    auto& ga = t.grad_accumulator(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += 2.0 * g * av[i];
  });
}

Var softmax_rows(Var a, std::span<const std::uint8_t> key_valid, std::span<const std::uint8_t> row_valid) {
  const auto& av = a.value();
  if (!key_valid.empty() && key_valid.size() != av.cols()) {
    throw std::invalid_argument("softmax_rows: key mask length " + std::to_string(key_valid.size()) +
                                " vs " + av.shape().to_string());
  }
  if (!row_valid.empty() && row_valid.size() != av.rows()) {
    throw std::invalid_argument("softmax_rows: row mask length " + std::to_string(row_valid.size()) +
                                " vs " + av.shape().to_string());
  }
  Tensor out(av.shape());
  for (std::size_t r = 0; r < av.rows(); ++r) {
    if (!row_valid.empty() && !row_valid[r]) continue;
    const auto y = softmax(av.row_span(r), key_valid);
    std::copy(y.begin(), y.end(), out.row_span(r).begin());
  }
  const auto ia = a.id();
  return a.tape().record(std::move(out), [ia](Tape& t, std::size_t self) {
    const auto& g = t.grad_accumulator(self);
    const auto& y = t.value(self);
    auto& ga = t.grad_accumulator(ia);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      const auto yr = y.row_span(r);
      const auto gr = g.row_span(r);
      double inner = 0.0;
      for (std::size_t c = 0; c < yr.size(); ++c) inner += yr[c] * gr[c];
      auto gar = ga.row_span(r);
      // Masked entries have y = 0 and so receive no gradient.
      for (std::size_t c = 0; c < yr.size(); ++c) gar[c] += yr[c] * (gr[c] - inner);
    }
  });
}

Var layer_norm_rows(Var x, Var gain, Var bias, double eps) {
  same_tape(x, gain, "layer_norm_rows");
  same_tape(x, bias, "layer_norm_rows");
  const auto& xv = x.value();
  const auto& gv = gain.value();
  const auto& bv = bias.value();
  const std::size_t n = xv.cols();
  if (gv.rows() != 1 || gv.cols() != n) shape_error("layer_norm_rows", xv.shape(), gv.shape());
  if (bv.rows() != 1 || bv.cols() != n) shape_error("layer_norm_rows", xv.shape(), bv.shape());
  if (n < 2) throw std::invalid_argument("layer_norm_rows: dim must be >= 2");

  Tensor out(xv.shape());
  Tensor normalized(xv.shape());
  std::vector<double> inv_std(xv.rows());
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    const auto row = xv.row_span(r);
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < n; ++c) {
      normalized(r, c) = (row[c] - mean) * inv_std[r];
      out(r, c) = normalized(r, c) * gv[c] + bv[c];
    }
  }
  const auto ix = x.id(), ig = gain.id(), ib = bias.id();
  return x.tape().record(
      std::move(out), [ix, ig, ib, normalized = std::move(normalized),
                       inv_std = std::move(inv_std)](Tape& t, std::size_t self) {
        const auto& g = t.grad_accumulator(self);
        const auto& gv = t.value(ig);
        const std::size_t n = g.cols();
        {
          auto& gg = t.grad_accumulator(ig);
          auto& gb = t.grad_accumulator(ib);
          for (std::size_t r = 0; r < g.rows(); ++r) {
            for (std::size_t c = 0; c < n; ++c) {
              gg[c] += g(r, c) * normalized(r, c);
              gb[c] += g(r, c);
            }
          }
        }
        auto& gx = t.grad_accumulator(ix);
        std::vector<double> dxhat(n);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          double mean_d = 0.0, mean_dx = 0.0;
          for (std::size_t c = 0; c < n; ++c) {
            dxhat[c] = g(r, c) * gv[c];
            mean_d += dxhat[c];
            mean_dx += dxhat[c] * normalized(r, c);
          }
          mean_d /= static_cast<double>(n);
          mean_dx /= static_cast<double>(n);
          for (std::size_t c = 0; c < n; ++c) {
            gx(r, c) += inv_std[r] * (dxhat[c] - mean_d - normalized(r, c) * mean_dx);
          }
        }
      });
}

Var gather_rows(Tape& tape, const Tensor& table, Tensor* grad_sink,
                std::span<const std::size_t> rows) {
  if (grad_sink != nullptr && grad_sink->shape() != table.shape()) {
    shape_error("gather_rows", table.shape(), grad_sink->shape());
  }
  Tensor out(rows.size(), table.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= table.rows()) {
      throw std::out_of_range("gather_rows: row " + std::to_string(rows[i]) + " of " +
                              table.shape().to_string());
    }
    const auto src = table.row_span(rows[i]);
    std::copy(src.begin(), src.end(), out.row_span(i).begin());
  }
  if (grad_sink == nullptr) return tape.constant(std::move(out));
  std::vector<std::size_t> index(rows.begin(), rows.end());
  return tape.record(std::move(out), [grad_sink, index = std::move(index)](Tape& t, std::size_t self) {
    const auto& g = t.grad_accumulator(self);
    for (std::size_t i = 0; i < index.size(); ++i) {
      const auto src = g.row_span(i);
      auto dst = grad_sink->row_span(index[i]);
      for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
    }
  });
}

}  // namespace nextpoi::num
