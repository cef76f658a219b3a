#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "nextpoi/grad_check.hpp"
#include "nextpoi/ops.hpp"
#include "nextpoi/rng.hpp"
#include "nextpoi/types.hpp"

using namespace nextpoi;
using namespace nextpoi::num;

namespace {

Tensor random_tensor(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Tensor t(r, c);
  for (auto& v : t.data()) v = scale * (2.0 * uniform01(rng) - 1.0);
  return t;
}

// Fixed random projection so every op is checked through a scalar.
Var project(Var y, std::uint64_t seed) {
  Rng rng(seed);
  auto& tape = y.tape();
  return dot(y, tape.constant(random_tensor(y.shape().rows, y.shape().cols, rng)));
}

double check(const std::function<Var(Tape&, Var)>& f, const Tensor& x) {
  return grad_check(f, x).max_relative_error;
}

}  // namespace

TEST(Softmax, SpotValues) {
  const std::vector<double> zero{0.0, 0.0};
  EXPECT_EQ(softmax(zero), (std::vector<double>{0.5, 0.5}));
  const std::vector<double> ln2{std::log(2.0), 0.0};
  const auto s = softmax(ln2);
  EXPECT_NEAR(s[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(s[1], 1.0 / 3.0, 1e-15);
}

TEST(Softmax, SumsToOneOnRandomVectors) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = 1 + uniform_index(rng, 40);
    const double scale = i % 2 ? 1e3 : 3.0;
    std::vector<double> v(n);
    for (auto& x : v) x = scale * (2.0 * uniform01(rng) - 1.0);
    double sum = 0.0;
    for (double p : softmax(v)) {
      EXPECT_GE(p, 0.0);
      sum += p;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(Softmax, MaskedPositionsGetZero) {
  const std::vector<double> v{5.0, 1.0, 1.0};
  const std::vector<std::uint8_t> valid{0, 1, 1};
  EXPECT_EQ(softmax(v, valid), (std::vector<double>{0.0, 0.5, 0.5}));
}

TEST(LayerNorm, ConstantVectorMapsToZero) {
  const std::vector<double> x(6, 3.25), gain(6, 1.0), bias(6, 0.0);
  for (double v : layer_norm(x, gain, bias)) EXPECT_EQ(v, 0.0);
}

TEST(LayerNorm, StandardizesRow) {
  const std::vector<double> x{1, 2, 3, 4}, gain(4, 1.0), bias(4, 0.0);
  const auto y = layer_norm(x, gain, bias, 0.0);
  double mean = 0, var = 0;
  for (double v : y) mean += v / 4.0;
  for (double v : y) var += (v - mean) * (v - mean) / 4.0;
  EXPECT_NEAR(mean, 0.0, 1e-15);
  EXPECT_NEAR(var, 1.0, 1e-14);
}

TEST(Backward, SumGivesOnes) {
  Tape tape;
  Tensor x = Tensor::row({1.0, -2.0, 7.0});
  Tensor g(1, 3);
  const Var v = tape.param(x, &g);
  tape.backward(sum(v));
  EXPECT_EQ(g, Tensor::row({1.0, 1.0, 1.0}));
}

TEST(Backward, SumOfSquares) {
  Tape tape;
  Tensor x = Tensor::row({1.0, 2.0});
  Tensor g(1, 2);
  tape.backward(sum(hadamard(tape.param(x, &g), tape.param(x, &g))));
  EXPECT_EQ(g, Tensor::row({2.0, 4.0}));
}

TEST(Backward, TwiceThrows) {
  Tape tape;
  const Var v = tape.constant(Tensor::scalar(2.0));
  const Var loss = sum(v);
  tape.backward(loss);
  EXPECT_THROW(tape.backward(loss), std::logic_error);
}

TEST(Backward, RequiresScalarLoss) {
  Tape tape;
  EXPECT_THROW(tape.backward(tape.constant(Tensor(2, 1))), std::invalid_argument);
}

TEST(Backward, ReusedTensorAccumulates) {
  // f(x) = sum(sigmoid(x) * x) + sum(x W x^T)
  Rng rng(3);
  const Tensor w = random_tensor(3, 3, rng);
  const auto f = [&](Tape& t, Var x) {
    return add(sum(hadamard(sigmoid(x), x)), sum(matmul(matmul(x, t.constant(w)), transpose(x))));
  };
  EXPECT_LT(check(f, random_tensor(1, 3, rng)), 1e-6);
}

TEST(Ops, ShapeMismatchNamesBothShapes) {
  Tape tape;
  const Var a = tape.constant(Tensor(2, 3));
  const Var b = tape.constant(Tensor(2, 2));
  try {
    matmul(a, b);
    FAIL();
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("(2x3)"), std::string::npos);
    EXPECT_NE(msg.find("(2x2)"), std::string::npos);
  }
  EXPECT_THROW(add(a, b), std::invalid_argument);
  EXPECT_THROW(hadamard(a, b), std::invalid_argument);
  EXPECT_THROW(split_heads(a, 2), std::invalid_argument);
}

TEST(GradCheck, QuadraticIsExact) {
  const auto r = grad_check([](Tape&, Var x) { return sum(hadamard(x, x)); }, Tensor::row({3.0}));
  EXPECT_NEAR(r.analytic, 6.0, 1e-12);
  EXPECT_NEAR(r.numeric, 6.0, 1e-7);
}

TEST(GradCheck, SoftmaxComponent) {
  Rng rng(5);
  const auto f = [](Tape& t, Var x) {
    return dot(softmax_rows(x), t.constant(Tensor::row({0.0, 1.0, 0.0, 0.0})));
  };
  EXPECT_LT(check(f, random_tensor(1, 4, rng)), 1e-6);
}

TEST(GradCheck, ElementwiseKernels) {
  Rng rng(7);
  const Tensor x = random_tensor(3, 4, rng, 2.0);
  EXPECT_LT(check([](Tape&, Var v) { return project(sigmoid(v), 1); }, x), 1e-6);
  EXPECT_LT(check([](Tape&, Var v) { return project(softplus(v), 2); }, x), 1e-6);
  EXPECT_LT(check([](Tape&, Var v) { return project(relu(v), 3); }, x), 1e-6);
  EXPECT_LT(check([](Tape&, Var v) { return project(scale(v, -1.7), 4); }, x), 1e-6);
  EXPECT_LT(check([](Tape&, Var v) { return project(add(v, v), 5); }, x), 1e-6);
  EXPECT_LT(check([](Tape&, Var v) { return project(sub(v, hadamard(v, v)), 6); }, x), 1e-6);
  EXPECT_LT(check([](Tape&, Var v) { return sum_squares(v); }, x), 1e-6);
}

TEST(GradCheck, StructuralKernels) {
  Rng rng(8);
  const Tensor x = random_tensor(3, 4, rng);
  const Tensor w = random_tensor(4, 5, rng), row = random_tensor(1, 4, rng);
  EXPECT_LT(check([&](Tape& t, Var v) { return project(matmul(v, t.constant(w)), 7); }, x), 1e-5);
  EXPECT_LT(check([&](Tape& t, Var v) { return project(matmul(t.constant(w), v), 8); }, random_tensor(5, 2, rng)),
            1e-5);
  EXPECT_LT(check([](Tape&, Var v) { return project(transpose(v), 9); }, x), 1e-6);
  EXPECT_LT(check([&](Tape& t, Var v) { return project(add_row(v, t.constant(row)), 10); }, x), 1e-6);
  EXPECT_LT(check([&](Tape& t, Var v) { return project(add_row(t.constant(x), v), 11); }, row), 1e-6);
  EXPECT_LT(check([](Tape&, Var v) { return project(slice_cols(v, 1, 2), 12); }, x), 1e-6);
  EXPECT_LT(check([](Tape&, Var v) { return project(concat_cols(split_heads(v, 2)), 13); }, x), 1e-6);
  EXPECT_LT(check([](Tape&, Var v) {
              const auto h = split_heads(v, 2);
              const std::vector<Var> swapped{h[1], h[0]};
              return project(concat_cols(swapped), 14);
            }, x), 1e-6);
  EXPECT_LT(check([](Tape&, Var v) { return project(pad_rows(v, 5), 15); }, x), 1e-6);
}

TEST(GradCheck, SoftmaxAndLayerNormRows) {
  Rng rng(9);
  const Tensor x = random_tensor(4, 5, rng, 2.0);
  const std::vector<std::uint8_t> keys{1, 0, 1, 1, 1}, rows{1, 1, 0, 1};
  EXPECT_LT(check([](Tape&, Var v) { return project(softmax_rows(v), 16); }, x), 1e-5);
  EXPECT_LT(check([&](Tape&, Var v) { return project(softmax_rows(v, keys, rows), 17); }, x), 1e-5);
  const Tensor gain = random_tensor(1, 5, rng), bias = random_tensor(1, 5, rng);
  EXPECT_LT(check([&](Tape& t, Var v) { return project(layer_norm_rows(v, t.constant(gain), t.constant(bias)), 18); },
                  x), 1e-5);
  EXPECT_LT(check([&](Tape& t, Var g) { return project(layer_norm_rows(t.constant(x), g, t.constant(bias)), 19); },
                  gain), 1e-5);
  EXPECT_LT(check([&](Tape& t, Var b) { return project(layer_norm_rows(t.constant(x), t.constant(gain), b), 20); },
                  bias), 1e-5);
}

TEST(GradCheck, AttentionBlockTinyConfig) {
  const auto cfg = fixtures::tiny_config(1);
  const auto params = fixtures::random_params(cfg, 3, 6, 4, 17);
  Rng rng(6);
  const Tensor x = random_tensor(4, 8, rng);
  const auto f = [&](Tape& t, Var v) {
    model::Network net(t, params);
    return project(net.attention_block(v, {}, 0, model::Channel::stc).outputs, 21);
  };
  EXPECT_LT(check(f, x), 1e-4);
}

TEST(GatherRows, ScatterAddsIntoSink) {
  Tensor table = Tensor::from_rows({{1, 2}, {3, 4}, {5, 6}});
  Tensor sink(3, 2);
  Tape tape;
  const std::vector<std::size_t> rows{2, 0, 2};
  const Var g = gather_rows(tape, table, &sink, rows);
  EXPECT_EQ(g.value(), Tensor::from_rows({{5, 6}, {1, 2}, {5, 6}}));
  tape.backward(sum(g));
  EXPECT_EQ(sink, Tensor::from_rows({{1, 1}, {0, 0}, {2, 2}}));
  Tape t2;
  const std::vector<std::size_t> bad{3};
  EXPECT_THROW(gather_rows(t2, table, nullptr, bad), std::out_of_range);
}

TEST(Determinism, BitIdenticalForward) {
  Rng rng(12);
  const Tensor x = random_tensor(6, 8, rng), w = random_tensor(8, 8, rng);
  auto run = [&] {
    Tape t;
    const Var v = t.constant(x);
    return layer_norm_rows(softmax_rows(matmul(v, t.constant(w))), t.constant(Tensor(1, 8, 1.0)),
                           t.constant(Tensor(1, 8, 0.0)))
        .value();
  };
  EXPECT_EQ(run(), run());
}

TEST(Tensor, Basics) {
  EXPECT_THROW(Tensor(2, 2, std::vector<double>{1, 2, 3}), std::invalid_argument);
  EXPECT_EQ(Tensor::identity(2), Tensor::from_rows({{1, 0}, {0, 1}}));
  EXPECT_EQ(Tensor::scalar(3).item(), 3.0);
  Tensor t(1, 2);
  t[0] = std::nan("");
  EXPECT_FALSE(t.all_finite());
}
