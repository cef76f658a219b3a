#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "nextpoi/tape.hpp"
#include "nextpoi/tensor.hpp"

namespace nextpoi::num {

inline constexpr double kLayerNormEps = 1e-6;

/// Per-position validity flags (1 = real, 0 = padding). Not vector<bool>, so
/// it can be viewed as a span.
using Mask = std::vector<std::uint8_t>;

// Scalar and row kernels shared by the differentiable ops.

double sigmoid(double x);
/// ln(1 + e^x) without overflow.
double softplus(double x);

/// Max-subtracted softmax. Positions with valid[i] == false get exactly 0; an
/// empty `valid` means all positions count.
std::vector<double> softmax(std::span<const double> v, std::span<const std::uint8_t> valid = {});

/// (x - mean) / sqrt(var + eps) * gain + bias with population variance.
std::vector<double> layer_norm(std::span<const double> x, std::span<const double> gain,
                               std::span<const double> bias, double eps = kLayerNormEps);

// Differentiable ops. Shape mismatches throw std::invalid_argument naming
// both shapes. Broadcasting is limited to add_row.

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// a (n x d) + row (1 x d) added to every row.
Var add_row(Var a, Var row);
Var scale(Var a, double s);
Var hadamard(Var a, Var b);
Var sigmoid(Var a);
Var relu(Var a);
Var softplus(Var a);

Var concat_cols(std::span<const Var> parts);
Var slice_cols(Var a, std::size_t begin, std::size_t count);
/// Equal column slices, one per head.
std::vector<Var> split_heads(Var a, std::size_t heads);
/// Appends zero rows until `a` has `rows` rows.
Var pad_rows(Var a, std::size_t rows);

Var sum(Var a);
/// Sum of a ⊙ b as 1 x 1.
Var dot(Var a, Var b);
Var sum_squares(Var a);

/// Row-wise softmax. Entries whose column is invalid get weight 0; rows whose
/// row flag is invalid are all zero.
Var softmax_rows(Var a, std::span<const std::uint8_t> key_valid = {}, std::span<const std::uint8_t> row_valid = {});

/// Row-wise layer normalization with 1 x d gain and bias.
Var layer_norm_rows(Var x, Var gain, Var bias, double eps = kLayerNormEps);

/// Rows of a borrowed table; backward scatter-adds into `grad_sink` (which may
/// be null for frozen tables).
Var gather_rows(Tape& tape, const Tensor& table, Tensor* grad_sink,
                std::span<const std::size_t> rows);

}  // namespace nextpoi::num
