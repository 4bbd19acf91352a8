#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tricycle/errors.hpp"
#include "tricycle/scene.hpp"
#include "tricycle/trainer.hpp"

namespace tricycle {
namespace {

namespace fs = std::filesystem;

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.crop_size = 16;
  cfg.steps = 6;
  cfg.seed = 11;
  cfg.generator.levels = 3;
  cfg.generator.base_channels = 4;
  cfg.discriminator.layers = 2;
  cfg.discriminator.base_channels = 4;
  return cfg;
}

UnpairedData tiny_data(std::size_t n = 6) {
  SceneGenConfig sc;
  sc.size = 32;
  std::vector<DepthImage> clean;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = Rng::stream(5, i);
    clean.push_back(generate_scene(sc, rng));
  }
  DegradeConfig dc;
  dc.down_factor = 4;
  return UnpairedData::synthetic(clean, dc);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("tricycle_test_trainer_" + name);
  fs::remove_all(dir);
  return dir;
}

std::vector<ArrayX<float>> values_of(const std::vector<Tensor<float>>& params) {
  std::vector<ArrayX<float>> out;
  for (const auto& p : params) out.push_back(p.value());
  return out;
}

bool same_values(const std::vector<ArrayX<float>>& a, const std::vector<Tensor<float>>& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!(a[i] == b[i].value()).all()) return false;
  return true;
}

TEST(Checkpoint, RoundTripAndCorruption) {
  const TrainConfig cfg = tiny_config();
  const TrainState state = TrainState::initialize(cfg);
  const std::string bytes = encode_checkpoint(snapshot(state));
  ASSERT_EQ(bytes.substr(0, 4), "TCG1");
  EXPECT_EQ(encode_checkpoint(decode_checkpoint(bytes)), bytes);

  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad), FormatError);
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), FormatError);
  EXPECT_THROW(decode_checkpoint(bytes + "z"), FormatError);
  EXPECT_THROW(load_checkpoint(scratch("missing") / "nope.tcg"), DataError);
}

TEST(Checkpoint, RestoreRejectsOtherArchitecture) {
  TrainConfig cfg = tiny_config();
  const Checkpoint ckpt = snapshot(TrainState::initialize(cfg));
  cfg.generator.base_channels = 6;
  TrainState other = TrainState::initialize(cfg);
  EXPECT_THROW(restore(other, ckpt), ShapeError);
  cfg = tiny_config();
  cfg.discriminator.layers = 3;
  TrainState deeper = TrainState::initialize(cfg);
  EXPECT_THROW(restore(deeper, ckpt), ShapeError);
}

TEST(Checkpoint, LoadGeneratorInfersArchitecture) {
  const TrainConfig cfg = tiny_config();
  const TrainState state = TrainState::initialize(cfg);
  const Generator<float> g = load_generator(snapshot(state));
  EXPECT_EQ(g.config().levels, 3);
  EXPECT_EQ(g.config().base_channels, 4);
  const auto a = state.low_to_high.parameters(), b = g.parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_TRUE((a[i].value() == b[i].value()).all());
  EXPECT_THROW(load_generator(snapshot(state), "nothing"), ShapeError);
}

TEST(Sampling, UniformOverEachDomain) {
  const UnpairedData data = tiny_data(4);
  const TrainConfig cfg = tiny_config();
  Rng rng(3);
  std::array<int, 4> low{}, high{};
  const int n = 4000;
  for (int i = 0; i < n; ++i) {
    const SampledPair p = sample_pair(data, cfg, rng);
    ++low[p.low_index];
    ++high[p.high_index];
    if (i == 0) {
      EXPECT_EQ(p.low.shape(), nchw(1, 1, 16, 16));
      EXPECT_LE(p.high.value().maxCoeff(), 1.0f);
      EXPECT_GE(p.high.value().minCoeff(), 0.0f);
    }
  }
  // Chi-square with 3 degrees of freedom, 0.1% critical value 16.27.
  auto chi2 = [&](const std::array<int, 4>& counts) {
    double s = 0;
    for (int c : counts) s += (c - n / 4.0) * (c - n / 4.0) / (n / 4.0);
    return s;
  };
  EXPECT_LT(chi2(low), 16.27);
  EXPECT_LT(chi2(high), 16.27);
  EXPECT_THROW(sample_pair(UnpairedData{}, cfg, rng), DataError);
}

TEST(TrainStep, UpdatesAndGradientHygiene) {
  const TrainConfig cfg = tiny_config();
  TrainState state = TrainState::initialize(cfg);
  const UnpairedData data = tiny_data();
  const SampledPair pair = sample_pair(data, cfg, state.rng);
  const auto g_before = values_of(state.low_to_high.parameters());
  const auto d_before = values_of(state.disc_high.parameters());
  const LossReport r = train_step(state, cfg, pair.low, pair.high);
  EXPECT_EQ(state.step, 1);
  EXPECT_FALSE(same_values(g_before, state.low_to_high.parameters()));
  EXPECT_FALSE(same_values(d_before, state.disc_high.parameters()));
  for (const auto* list : {&state.low_to_high, &state.high_to_low})
    for (const auto& p : list->parameters()) EXPECT_FALSE(p.has_grad());
  for (const auto& p : state.disc_low.parameters()) {
    EXPECT_FALSE(p.has_grad());
    EXPECT_TRUE(p.requires_grad());
  }
  double expect = 0.0;
  for (int i = 0; i < kTermCount; ++i) expect += cfg.weights[i] * r.terms[static_cast<std::size_t>(i)];
  EXPECT_NEAR(r.total, expect, 1e-5 * expect);
  EXPECT_GT(r.discriminator_h, 0.0);
}

TEST(TrainStep, ZeroWeightsLeaveGeneratorsAlone) {
  TrainConfig cfg = tiny_config();
  cfg.weights = LossWeights::zeros();
  TrainState state = TrainState::initialize(cfg);
  const SampledPair pair = sample_pair(tiny_data(), cfg, state.rng);
  const auto g_before = values_of(state.high_to_low.parameters());
  const auto d_before = values_of(state.disc_low.parameters());
  train_step(state, cfg, pair.low, pair.high);
  EXPECT_TRUE(same_values(g_before, state.high_to_low.parameters()));
  EXPECT_FALSE(same_values(d_before, state.disc_low.parameters()));
}

TEST(TrainStep, NonFiniteIsReported) {
  const TrainConfig cfg = tiny_config();
  TrainState state = TrainState::initialize(cfg);
  const SampledPair pair = sample_pair(tiny_data(), cfg, state.rng);
  state.low_to_high.parameters().front().mutable_value()[0] = std::nanf("");
  EXPECT_THROW(train_step(state, cfg, pair.low, pair.high), NumericalError);
}

TEST(Train, LogFormat) {
  TrainConfig cfg = tiny_config();
  cfg.steps = 2;
  const fs::path dir = scratch("log");
  train(cfg, tiny_data(), TrainOutputs{dir});
  std::ifstream log(dir / "train_log.tsv");
  std::string line;
  std::getline(log, line);
  EXPECT_EQ(line, "step\tterm\tvalue");
  int rows = 0;
  while (std::getline(log, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), '\t'), 2) << line;
  }
  EXPECT_EQ(rows, 2 * (kTermCount + 3));
  EXPECT_TRUE(fs::exists(dir / "final.tcg"));
}

TEST(Train, DeterministicAndResumable) {
  TrainConfig cfg = tiny_config();
  cfg.checkpoint_interval = 3;
  const UnpairedData data = tiny_data();
  const fs::path a = scratch("a"), b = scratch("b"), c = scratch("c");
  train(cfg, data, TrainOutputs{a});
  train(cfg, data, TrainOutputs{b});
  const std::string final_a = slurp(a / "final.tcg");
  EXPECT_EQ(final_a, slurp(b / "final.tcg"));
  EXPECT_EQ(slurp(a / "train_log.tsv"), slurp(b / "train_log.tsv"));

  // Resume from the middle checkpoint in a fresh directory.
  fs::create_directories(c);
  fs::copy_file(a / "step_00000003.tcg", c / "step_00000003.tcg");
  const TrainState resumed = train(cfg, data, TrainOutputs{c}, c / "step_00000003.tcg");
  EXPECT_EQ(resumed.step, 6);
  EXPECT_EQ(slurp(c / "final.tcg"), final_a);
  EXPECT_EQ(slurp(c / "step_00000006.tcg"), slurp(a / "step_00000006.tcg"));

  cfg.seed = 12;
  const fs::path d = scratch("d");
  train(cfg, data, TrainOutputs{d});
  EXPECT_NE(slurp(d / "final.tcg"), final_a);
}

TEST(TrainConfig, Validation) {
  TrainConfig cfg = tiny_config();
  cfg.batch_size = 2;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = tiny_config();
  cfg.lr = -1;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = tiny_config();
  cfg.crop_size = 18;
  EXPECT_THROW(cfg.validate(), ShapeError);
  cfg = tiny_config();
  EXPECT_THROW(train(cfg, UnpairedData{}, TrainOutputs{scratch("empty")}), DataError);
}

}  // namespace
}  // namespace tricycle
