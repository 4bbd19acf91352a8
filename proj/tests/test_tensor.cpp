#include <gtest/gtest.h>

#include <array>
#include <cmath>

#include "tricycle/adam.hpp"
#include "tricycle/gradcheck.hpp"
#include "tricycle/ops.hpp"
#include "tricycle/random.hpp"

namespace tricycle {
namespace {

using T = Tensor<double>;

T filled(Shape shape, std::initializer_list<double> values, bool grad = false) {
  ArrayX<double> v(static_cast<Index>(values.size()));
  Index i = 0;
  for (double x : values) v[i++] = x;
  return T::make(std::move(shape), std::move(v), grad);
}

T random_tensor(Shape shape, Rng& rng, bool grad = true) {
  ArrayX<double> v(shape.numel());
  for (Index i = 0; i < v.size(); ++i) v[i] = rng.normal();
  return T::make(std::move(shape), std::move(v), grad);
}

// Straightforward six-loop convolution, zero padding 1.
ArrayX<double> naive_conv(const T& x, const T& w, const T& b, int stride) {
  const Index n = x.shape().batch(), cin = x.shape().channels(), h = x.shape().height(), wd = x.shape().width();
  const Index cout = w.shape()[0], ho = h / stride, wo = wd / stride;
  ArrayX<double> out(n * cout * ho * wo);
  for (Index bi = 0; bi < n; ++bi)
    for (Index co = 0; co < cout; ++co)
      for (Index oy = 0; oy < ho; ++oy)
        for (Index ox = 0; ox < wo; ++ox) {
          double acc = b.value()[co];
          for (Index ci = 0; ci < cin; ++ci)
            for (int ky = 0; ky < 3; ++ky)
              for (int kx = 0; kx < 3; ++kx) {
                const Index iy = oy * stride + ky - 1, ix = ox * stride + kx - 1;
                if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
                acc += w.value()[((co * cin + ci) * 3 + ky) * 3 + kx] *
                       x.value()[((bi * cin + ci) * h + iy) * wd + ix];
              }
          out[((bi * cout + co) * ho + oy) * wo + ox] = acc;
        }
  return out;
}

TEST(Conv2d, MatchesDirectLoops) {
  Rng rng(3);
  for (int stride : {1, 2}) {
    const T x = random_tensor(nchw(2, 3, 6, 8), rng);
    const T w = random_tensor(nchw(4, 3, 3, 3), rng);
    const T b = random_tensor(Shape{4}, rng);
    Graph<double> g;
    const T y = conv2d(g, x, w, b, stride);
    EXPECT_EQ(y.shape(), nchw(2, 4, 6 / stride, 8 / stride));
    EXPECT_LT((y.value() - naive_conv(x, w, b, stride)).abs().maxCoeff(), 1e-12);
  }
}

TEST(Conv2d, TableShapes) {
  Rng rng(1);
  Graph<float> g(false);
  const auto x = Tensor<float>::zeros(nchw(1, 1, 128, 128));
  const auto w1 = Tensor<float>::zeros(nchw(128, 1, 3, 3));
  const auto b = Tensor<float>::zeros(Shape{128});
  const auto y = conv2d(g, x, w1, b, 1);
  EXPECT_EQ(y.shape(), nchw(1, 128, 128, 128));
  EXPECT_TRUE((y.value() == 0.0f).all());
  const auto w2 = Tensor<float>::zeros(nchw(128, 128, 3, 3));
  EXPECT_EQ(conv2d(g, y, w2, b, 2).shape(), nchw(1, 128, 64, 64));
}

TEST(Conv2d, RejectsBadShapes) {
  Graph<double> g;
  const T x = T::zeros(nchw(1, 2, 5, 5));
  const T w = T::zeros(nchw(3, 2, 3, 3));
  const T b = T::zeros(Shape{3});
  EXPECT_THROW(conv2d(g, x, w, b, 2), ShapeError);
  EXPECT_THROW(conv2d(g, x, T::zeros(nchw(3, 1, 3, 3)), b, 1), ShapeError);
  EXPECT_THROW(conv2d(g, x, w, T::zeros(Shape{2}), 1), ShapeError);
  EXPECT_THROW(conv2d(g, x, T::zeros(nchw(3, 2, 5, 5)), b, 1), ShapeError);
}

TEST(LeakyRelu, ValuesAndSlope) {
  Graph<double> g;
  const T x = filled(Shape{3}, {5.0, -5.0, -1.0}, true);
  const T y = leaky_relu(g, x);
  EXPECT_DOUBLE_EQ(y.value()[0], 5.0);
  EXPECT_DOUBLE_EQ(y.value()[1], -1.0);
  g.backward(sum(g, y));
  EXPECT_DOUBLE_EQ(x.grad()[2], 0.2);
  EXPECT_DOUBLE_EQ(x.grad()[0], 1.0);
}

TEST(LeakyRelu, SlopeAtZeroIsAlpha) {
  Graph<double> g;
  const T x = filled(Shape{1}, {0.0}, true);
  g.backward(sum(g, leaky_relu(g, x)));
  EXPECT_DOUBLE_EQ(x.grad()[0], 0.2);
}

TEST(InstanceNorm, ConstantSliceGivesZeros) {
  Graph<double> g;
  const T x = T::constant(nchw(1, 2, 3, 3), ArrayX<double>::Constant(18, 7.5));
  const T y = instance_norm(g, x, T::constant(Shape{2}, ArrayX<double>::Ones(2)), T::zeros(Shape{2}));
  EXPECT_TRUE((y.value() == 0.0).all());
}

TEST(InstanceNorm, NormalizesEachSlice) {
  Rng rng(5);
  Graph<double> g;
  const T x = random_tensor(nchw(2, 3, 8, 8), rng, false);
  x.mutable_value() = x.value() * 4.0 + 3.0;
  const T y = instance_norm(g, x, T::constant(Shape{3}, ArrayX<double>::Ones(3)), T::zeros(Shape{3}), 1e-5);
  for (Index slice = 0; slice < 6; ++slice) {
    const auto s = y.value().segment(slice * 64, 64);
    EXPECT_LE(std::abs(s.mean()), 1e-6);
    EXPECT_NEAR((s - s.mean()).square().mean(), 1.0, 1e-3);
  }
}

TEST(InstanceNorm, RejectsSingletonSpatial) {
  Graph<double> g;
  EXPECT_THROW(instance_norm(g, T::zeros(nchw(1, 1, 1, 1)), T::zeros(Shape{1}), T::zeros(Shape{1})), ShapeError);
}

TEST(InstanceNorm, GradientSmallTensor) {
  Rng rng(11);
  const T x = random_tensor(nchw(1, 2, 4, 4), rng);
  const T gain = filled(Shape{2}, {1.3, 0.7}, true);
  const T shift = filled(Shape{2}, {0.1, -0.2}, true);
  const T mix = random_tensor(nchw(1, 2, 3, 3), rng, false);
  const T zero = T::zeros(Shape{1});
  const GradCheckCase c{"instance_norm", {x, gain, shift}, [=](Graph<double>& g) {
                          return mean_squared_to(g, conv2d(g, instance_norm(g, x, gain, shift), mix, zero, 1), 0.0);
                        }};
  EXPECT_LE(run_gradcheck(c).worst_relative_error, 1e-4);
}

TEST(Upsample, ReplicatesBlocks) {
  Graph<double> g;
  const T x = filled(nchw(1, 1, 2, 2), {1, 2, 3, 4}, true);
  const T y = upsample_nn(g, x);
  ASSERT_EQ(y.shape(), nchw(1, 1, 4, 4));
  const double expect[16] = {1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
  for (int i = 0; i < 16; ++i) EXPECT_EQ(y.value()[i], expect[i]);
  g.backward(sum(g, y));
  EXPECT_TRUE((x.grad() == 4.0).all());
}

TEST(Upsample, TableShape) {
  Graph<float> g(false);
  EXPECT_EQ(upsample_nn(g, Tensor<float>::zeros(nchw(1, 128, 2, 2))).shape(), nchw(1, 128, 4, 4));
}

TEST(Concat, ShapesAndSplit) {
  Rng rng(2);
  Graph<double> g;
  const T a = random_tensor(nchw(2, 3, 4, 4), rng);
  const T b = random_tensor(nchw(2, 1, 4, 4), rng);
  const T ab = concat_channels(g, a, b);
  EXPECT_EQ(ab.shape(), nchw(2, 4, 4, 4));
  const auto [a2, b2] = split_channels(ab, 3);
  EXPECT_TRUE((a2.value() == a.value()).all());
  EXPECT_TRUE((b2.value() == b.value()).all());
  const T empty = T::zeros(nchw(2, 0, 4, 4));
  EXPECT_TRUE((concat_channels(g, a, empty).value() == a.value()).all());
  EXPECT_THROW(concat_channels(g, a, T::zeros(nchw(2, 1, 4, 2))), ShapeError);

  Graph<float> gf(false);
  EXPECT_EQ(concat_channels(gf, Tensor<float>::zeros(nchw(1, 128, 4, 4)), Tensor<float>::zeros(nchw(1, 128, 4, 4)))
                .shape(),
            nchw(1, 256, 4, 4));
}

TEST(L1Masked, WorkedExample) {
  Graph<double> g;
  const T a = filled(nchw(1, 1, 2, 2), {1, 2, 0, 4}, true);
  const T b = filled(nchw(1, 1, 2, 2), {2, 2, 5, 1}, true);
  const T mask = T::constant(a.shape(), (a.value() != 0.0).cast<double>());
  const T loss = l1_masked(g, a, b, mask);
  EXPECT_DOUBLE_EQ(loss.item(), 4.0);
  g.backward(loss);
  // sign(0) = 0 at the tie, masked entry gets nothing.
  EXPECT_DOUBLE_EQ(a.grad()[0], -1.0);
  EXPECT_DOUBLE_EQ(a.grad()[1], 0.0);
  EXPECT_DOUBLE_EQ(a.grad()[2], 0.0);
  EXPECT_DOUBLE_EQ(a.grad()[3], 1.0);
  EXPECT_DOUBLE_EQ(b.grad()[3], -1.0);
}

TEST(L1Masked, DegenerateMasksAndErrors) {
  Rng rng(4);
  Graph<double> g;
  const T a = random_tensor(nchw(1, 1, 3, 3), rng);
  const T b = random_tensor(nchw(1, 1, 3, 3), rng);
  EXPECT_EQ(l1_masked(g, a, b, T::zeros(a.shape())).item(), 0.0);
  EXPECT_EQ(l1_masked(g, a, a, T::constant(a.shape(), ArrayX<double>::Ones(9))).item(), 0.0);
  EXPECT_THROW(l1_masked(g, a, b, T::constant(a.shape(), ArrayX<double>::Constant(9, 0.5))),
               std::invalid_argument);
  EXPECT_THROW(l1_masked(g, a, T::zeros(Shape{9}), T::zeros(a.shape())), ShapeError);
}

TEST(Backward, SumGivesOnes) {
  Rng rng(8);
  Graph<double> g;
  const T x = random_tensor(nchw(1, 2, 3, 3), rng);
  g.backward(sum(g, x));
  EXPECT_TRUE((x.grad() == 1.0).all());
}

TEST(Backward, RejectsNonScalarLoss) {
  Graph<double> g;
  const T x = T::zeros(Shape{3}, true);
  EXPECT_THROW(g.backward(scale(g, x, 2.0)), ShapeError);
}

TEST(Backward, ComposedGraphMatchesFiniteDifferences) {
  Rng rng(13);
  const T x = random_tensor(nchw(1, 2, 6, 6), rng);
  const T w = random_tensor(nchw(3, 2, 3, 3), rng);
  const T b = random_tensor(Shape{3}, rng);
  const T target = random_tensor(nchw(1, 3, 6, 6), rng, false);
  ArrayX<double> m(108);
  for (Index i = 0; i < m.size(); ++i) m[i] = (i % 5 == 0) ? 0.0 : 1.0;
  const T mask = T::constant(target.shape(), m);
  const GradCheckCase c{"composed", {x, w, b}, [=](Graph<double>& g) {
                          return l1_masked(g, leaky_relu(g, conv2d(g, x, w, b, 1)), target, mask);
                        }};
  EXPECT_LE(run_gradcheck(c).worst_relative_error, 1e-4);
}

TEST(Backward, DeterministicAcrossGraphs) {
  Rng rng(21);
  const T x = random_tensor(nchw(1, 2, 8, 8), rng);
  const T w = random_tensor(nchw(2, 2, 3, 3), rng);
  const T b = random_tensor(Shape{2}, rng);
  auto run = [&] {
    x.zero_grad();
    w.zero_grad();
    Graph<double> g;
    const T y = instance_norm(g, leaky_relu(g, conv2d(g, x, w, b, 2)), T::constant(Shape{2}, ArrayX<double>::Ones(2)),
                              T::zeros(Shape{2}));
    g.backward(mean_squared_to(g, y, 0.5));
    return std::pair{ArrayX<double>(x.grad()), ArrayX<double>(w.grad())};
  };
  const auto first = run();
  const auto second = run();
  EXPECT_TRUE((first.first == second.first).all());
  EXPECT_TRUE((first.second == second.second).all());
}

TEST(Backward, ReportsNonFiniteValuesWithRecordIndex) {
  Graph<double> g;
  const T x = filled(Shape{2}, {1.0, 2.0}, true);
  const T y = scale(g, x, 3.0);
  try {
    scale(g, y, std::numeric_limits<double>::infinity());
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("record 1"), std::string::npos) << e.what();
  }
}

TEST(Backward, ZeroWeightTermIsNotVisited) {
  Graph<double> g;
  const T a = filled(Shape{1}, {2.0}, true);
  const T b = filled(Shape{1}, {3.0}, true);
  const std::array<T, 2> terms{mean_squared_to(g, a, 0.0), mean_squared_to(g, b, 0.0)};
  const std::array<double, 2> w{1.5, 0.0};
  const T total = weighted_sum<double>(g, terms, w);
  EXPECT_DOUBLE_EQ(total.item(), 6.0);
  g.backward(total);
  EXPECT_DOUBLE_EQ(a.grad()[0], 6.0);
  EXPECT_FALSE(b.has_grad());
}

TEST(Backward, NonRecordingGraphKeepsNothing) {
  Graph<double> g(false);
  const T x = T::zeros(nchw(1, 1, 4, 4), true);
  const T y = leaky_relu(g, x);
  EXPECT_EQ(g.size(), 0u);
  EXPECT_EQ(y.numel(), 16);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  const T p = filled(Shape{3}, {1.0, -2.0, 0.5}, true);
  const std::vector<T> params{p};
  auto state = AdamState<double>::for_parameters(params);
  p.grad_buffer().setZero();
  adam_step<double>(params, state, 1e-3);
  EXPECT_EQ(state.step, 1u);
  EXPECT_EQ(p.value()[0], 1.0);
  EXPECT_EQ(p.value()[1], -2.0);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  const T p = filled(Shape{3}, {0.0, 0.0, 0.0}, true);
  const std::vector<T> params{p};
  auto state = AdamState<double>::for_parameters(params);
  p.grad_buffer() << 0.3, -4.0, 1e-2;
  adam_step<double>(params, state, 1e-3);
  // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
  const double expect[3] = {-1e-3 * 0.3 / (0.3 + 1e-8), 1e-3 * 4.0 / (4.0 + 1e-8), -1e-3 * 1e-2 / (1e-2 + 1e-8)};
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(p.value()[i], expect[i], 1e-15);
}

TEST(Adam, ConstantGradientMatchesScalarSimulation) {
  const T p = filled(Shape{1}, {1.0}, true);
  const std::vector<T> params{p};
  auto state = AdamState<double>::for_parameters(params);
  double x = 1.0, m = 0.0, v = 0.0, prev = 1.0;
  const double grad = 0.25, lr = 1e-2;
  for (int t = 1; t <= 50; ++t) {
    p.zero_grad();
    p.grad_buffer()[0] = grad;
    adam_step<double>(params, state, lr);
    m = 0.9 * m + 0.1 * grad;
    v = 0.999 * v + 0.001 * grad * grad;
    x -= lr * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    EXPECT_NEAR(p.value()[0], x, 1e-12);
    EXPECT_LT(p.value()[0], prev);
    prev = p.value()[0];
  }
  EXPECT_EQ(state.step, 50u);
}

TEST(Adam, RejectsMismatchedState) {
  const T p = T::zeros(Shape{3}, true);
  const std::vector<T> params{p};
  auto state = AdamState<double>::for_parameters(std::vector<T>{T::zeros(Shape{2}, true)});
  EXPECT_THROW(adam_step<double>(params, state, 1e-3), ShapeError);
  auto ok = AdamState<double>::for_parameters(params);
  EXPECT_THROW(adam_step<double>(params, ok, -1.0), std::invalid_argument);
}

TEST(FiniteDiff, QuadraticIsExact) {
  const T x = filled(Shape{2}, {1.0, 2.0}, true);
  const auto grad = finite_diff_grad([&] { return x.value().square().sum(); }, x, 1e-4);
  EXPECT_NEAR(grad[0], 2.0, 1e-8);
  EXPECT_NEAR(grad[1], 4.0, 1e-8);
  EXPECT_EQ(x.value()[0], 1.0);
}

TEST(FiniteDiff, ConstantIsZero) {
  const T x = filled(Shape{3}, {1.0, 2.0, 3.0}, true);
  EXPECT_TRUE((finite_diff_grad([] { return 5.0; }, x) == 0.0).all());
}

TEST(FiniteDiff, L1MatchesBackwardAwayFromKinks) {
  const T a = filled(Shape{4}, {0.3, -1.0, 2.0, 0.9}, true);
  const T b = T::constant(Shape{4}, ArrayX<double>::Constant(4, 0.5));
  const T mask = T::constant(Shape{4}, ArrayX<double>::Ones(4));
  const GradCheckCase c{"l1", {a}, [=](Graph<double>& g) { return l1_masked(g, a, b, mask); }};
  EXPECT_LE(run_gradcheck(c).worst_relative_error, 1e-4);
}

TEST(GradCheckSuite, EveryCasePasses) {
  const auto cases = builtin_gradcheck_cases();
  EXPECT_GE(cases.size(), 19u);
  for (const auto& c : cases) {
    const auto r = run_gradcheck(c);
    EXPECT_TRUE(r.passed) << r.name << " relative error " << r.worst_relative_error;
  }
}

}  // namespace
}  // namespace tricycle
