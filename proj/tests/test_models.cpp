#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "tricycle/enhance.hpp"
#include "tricycle/models.hpp"

namespace tricycle {
namespace {

struct Row {
  const char* name;
  Index height, width, channels;
};

// Layer table of the default generator (128x128 input, 128 channels).
const Row kTable[26] = {
    {"input", 128, 128, 1},   {"conv1", 128, 128, 128}, {"conv2.1", 64, 64, 128},  {"conv2.2", 64, 64, 128},
    {"conv3.1", 32, 32, 128}, {"conv3.2", 32, 32, 128}, {"conv4.1", 16, 16, 128},  {"conv4.2", 16, 16, 128},
    {"conv5.1", 8, 8, 128},   {"conv5.2", 8, 8, 128},   {"conv6.1", 4, 4, 128},    {"conv6.2", 4, 4, 128},
    {"conv7.1", 2, 2, 128},   {"conv7.2", 2, 2, 128},   {"conv6.3", 4, 4, 128},    {"conv6.4", 4, 4, 128},
    {"conv5.3", 8, 8, 128},   {"conv5.4", 8, 8, 128},   {"conv4.3", 16, 16, 128},  {"conv4.4", 16, 16, 128},
    {"conv3.3", 32, 32, 128}, {"conv3.4", 32, 32, 128}, {"conv2.3", 64, 64, 128},  {"conv2.4", 64, 64, 128},
    {"conv1.3", 128, 128, 128}, {"conv1.4", 128, 128, 1},
};

TEST(Generator, DefaultLayerTable) {
  Rng rng(1);
  const Generator<float> g(GeneratorConfig{}, rng);
  Graph<float> graph(false);
  LayerTrace trace;
  const auto y = g.forward(graph, Tensor<float>::zeros(nchw(1, 1, 128, 128)), &trace);
  ASSERT_EQ(trace.size(), 26u);
  for (std::size_t i = 0; i < 26; ++i) {
    EXPECT_EQ(trace[i].first, kTable[i].name);
    EXPECT_EQ(trace[i].second, nchw(1, kTable[i].channels, kTable[i].height, kTable[i].width)) << kTable[i].name;
  }
  EXPECT_EQ(y.shape(), nchw(1, 1, 128, 128));
}

TEST(Generator, DefaultParameterCount) {
  Rng rng(1);
  const Generator<float> g(GeneratorConfig{}, rng);
  Index total = 0;
  for (const auto& p : g.parameters()) total += p.numel();
  // 315 C^2 + 108 C + 1 for C = 128.
  EXPECT_EQ(total, 5174785);
}

TEST(Generator, UniqueNamesAndInit) {
  Rng rng(2);
  const Generator<double> g(GeneratorConfig{}, rng);
  std::set<std::string> names;
  double sum = 0.0, sq = 0.0;
  Index count = 0;
  for (const auto& p : g.named_parameters()) {
    EXPECT_TRUE(names.insert(p.name).second) << p.name;
    if (p.name.ends_with(".weight")) {
      sum += p.tensor.value().sum();
      sq += p.tensor.value().square().sum();
      count += p.tensor.numel();
    } else if (p.name.ends_with(".gain")) {
      EXPECT_TRUE((p.tensor.value() == 1.0).all());
    } else {
      EXPECT_TRUE((p.tensor.value() == 0.0).all()) << p.name;
    }
  }
  const double mean = sum / static_cast<double>(count);
  EXPECT_NEAR(mean, 0.0, 1e-4);
  EXPECT_NEAR(std::sqrt(sq / static_cast<double>(count) - mean * mean), 0.02, 1e-4);
}

TEST(Generator, ScaledConfigBottleneckAndMirror) {
  GeneratorConfig cfg;
  cfg.levels = 4;
  cfg.base_channels = 16;
  cfg.input_size = 64;
  Rng rng(3);
  const Generator<float> g(cfg, rng);
  Graph<float> graph(false);
  LayerTrace trace;
  g.forward(graph, Tensor<float>::zeros(nchw(1, 1, 64, 64)), &trace);
  std::vector<Index> encoder, decoder;
  for (const auto& [name, shape] : trace) {
    if (name == "conv4.2") EXPECT_EQ(shape, nchw(1, 16, 8, 8));
    if (name.ends_with(".2") || name == "conv1") encoder.push_back(shape.height());
    if (name.ends_with(".3")) decoder.push_back(shape.height());
  }
  // Encoder resolutions above the bottleneck mirror the decoder's.
  encoder.pop_back();
  std::reverse(decoder.begin(), decoder.end());
  EXPECT_EQ(encoder, decoder);
}

TEST(Generator, SameSeedSameParameters) {
  GeneratorConfig cfg;
  cfg.levels = 3;
  cfg.base_channels = 4;
  cfg.input_size = 16;
  Rng a(9), b(9);
  const Generator<float> ga(cfg, a), gb(cfg, b);
  const auto pa = ga.parameters(), pb = gb.parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_TRUE((pa[i].value() == pb[i].value()).all());
}

TEST(Generator, RejectsBadConfigAndInput) {
  GeneratorConfig cfg;
  cfg.input_size = 100;
  Rng rng(1);
  EXPECT_THROW(Generator<float>(cfg, rng), ShapeError);
  cfg.input_size = 64;
  cfg.levels = 4;
  cfg.base_channels = 2;
  const Generator<float> g(cfg, rng);
  Graph<float> graph(false);
  EXPECT_THROW(g.forward(graph, Tensor<float>::zeros(nchw(1, 1, 60, 64))), ShapeError);
  EXPECT_THROW(g.forward(graph, Tensor<float>::zeros(nchw(1, 2, 64, 64))), ShapeError);
}

TEST(Generator, GradientReachesEveryParameterAndIsDeterministic) {
  GeneratorConfig cfg;
  cfg.levels = 3;
  cfg.base_channels = 4;
  cfg.input_size = 16;
  Rng rng(4);
  const Generator<double> g(cfg, rng);
  ArrayX<double> v(256);
  for (Index i = 0; i < v.size(); ++i) v[i] = rng.uniform(0.0, 1.0);
  const auto x = Tensor<double>::constant(nchw(1, 1, 16, 16), v);
  Graph<double> graph;
  const auto y1 = g.forward(graph, x);
  graph.backward(mean_squared_to(graph, y1, 0.3));
  for (const auto& p : g.named_parameters()) {
    ASSERT_TRUE(p.tensor.has_grad()) << p.name;
    EXPECT_GT(p.tensor.grad().abs().maxCoeff(), 0.0) << p.name;
  }
  Graph<double> again(false);
  EXPECT_TRUE((g.forward(again, x).value() == y1.value()).all());
}

TEST(Discriminator, ScoreMapExtent) {
  Rng rng(5);
  DiscriminatorConfig cfg;
  cfg.base_channels = 8;
  const Discriminator<float> d(cfg, rng);
  Graph<float> graph(false);
  EXPECT_EQ(d.forward(graph, Tensor<float>::zeros(nchw(1, 1, 128, 128))).shape(), nchw(1, 1, 8, 8));
  EXPECT_THROW(d.forward(graph, Tensor<float>::zeros(nchw(1, 1, 8, 8))), ShapeError);
}

TEST(Discriminator, ZeroParametersGiveConstantMap) {
  Rng rng(6);
  const Discriminator<double> d(DiscriminatorConfig{2, 4}, rng);
  for (const auto& p : d.parameters()) p.mutable_value().setZero();
  ArrayX<double> v(256);
  for (Index i = 0; i < v.size(); ++i) v[i] = rng.uniform(0.0, 1.0);
  Graph<double> graph(false);
  const auto s = d.forward(graph, Tensor<double>::constant(nchw(1, 1, 16, 16), v));
  EXPECT_EQ(s.shape(), nchw(1, 1, 4, 4));
  EXPECT_EQ(s.value().maxCoeff(), s.value().minCoeff());
}

TEST(Discriminator, SameSeedSameParameters) {
  Rng a(7), b(7);
  const Discriminator<float> da(DiscriminatorConfig{}, a), db(DiscriminatorConfig{}, b);
  const auto pa = da.parameters(), pb = db.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_TRUE((pa[i].value() == pb[i].value()).all());
}

TEST(Enhance, ReflectPadding) {
  EXPECT_EQ(reflect_index(-1, 5), 1);
  EXPECT_EQ(reflect_index(5, 5), 3);
  EXPECT_EQ(reflect_index(9, 5), 1);
  DepthImage z(2, 3);
  z << 1, 2, 3, 4, 5, 6;
  const DepthImage p = reflect_pad(z, 4);
  ASSERT_EQ(p.rows(), 4);
  ASSERT_EQ(p.cols(), 4);
  EXPECT_EQ(p(0, 3), 2);
  EXPECT_EQ(p(2, 0), 1);
  EXPECT_EQ(p(3, 3), 5);
  EXPECT_TRUE((reflect_pad(p, 4) == p).all());
}

TEST(Enhance, SizesAndRange) {
  GeneratorConfig cfg;
  cfg.base_channels = 4;
  Rng rng(8);
  const Generator<float> g(cfg, rng);
  // Push the output well outside [0, 1] to exercise the clamp.
  for (const auto& p : g.named_parameters())
    if (p.name == "conv1.4.bias") p.tensor.mutable_value().setConstant(3.0f);
  DepthImage z(100, 100);
  for (Index i = 0; i < z.size(); ++i) z.data()[i] = static_cast<std::uint16_t>(rng.uniform_int(5000));
  const DepthImage out = enhance(g, z, 8000);
  EXPECT_EQ(out.rows(), 100);
  EXPECT_EQ(out.cols(), 100);
  EXPECT_LE(out.maxCoeff(), 8000);
  EXPECT_TRUE((out == 8000).all());
  EXPECT_TRUE((enhance(g, z, 8000) == out).all());

  for (const auto& p : g.named_parameters())
    if (p.name == "conv1.4.bias") p.tensor.mutable_value().setConstant(-3.0f);
  EXPECT_TRUE((enhance(g, z, 8000) == 0).all());
}

TEST(Enhance, ExactMultipleKeepsSize) {
  GeneratorConfig cfg;
  cfg.levels = 3;
  cfg.base_channels = 2;
  cfg.input_size = 8;
  Rng rng(9);
  const Generator<float> g(cfg, rng);
  const DepthImage z = DepthImage::Constant(12, 20, 1500);
  const DepthImage out = enhance(g, z, 8000);
  EXPECT_EQ(out.rows(), 12);
  EXPECT_EQ(out.cols(), 20);
}

TEST(Enhance, TensorConversionRoundTrip) {
  DepthImage z(1, 4);
  z << 0, 1, 4000, 8000;
  const auto t = depth_to_tensor<double>(z, 8000);
  EXPECT_EQ(t.shape(), nchw(1, 1, 1, 4));
  EXPECT_DOUBLE_EQ(t.value()[3], 1.0);
  EXPECT_TRUE((tensor_to_depth(t, 8000) == z).all());
  // Sub-half-millimetre outputs become holes.
  const auto tiny = Tensor<double>::constant(nchw(1, 1, 1, 2), (ArrayX<double>(2) << 0.4 / 8000, 0.6 / 8000).finished());
  const DepthImage d = tensor_to_depth(tiny, 8000);
  EXPECT_EQ(d(0, 0), 0);
  EXPECT_EQ(d(0, 1), 1);
}

}  // namespace
}  // namespace tricycle
