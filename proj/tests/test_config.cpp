#include <gtest/gtest.h>

#include <set>

#include "tricycle/config.hpp"
#include "tricycle/errors.hpp"

namespace tricycle {
namespace {

TEST(Settings, KeysAreUniqueAndDefaultsMatch) {
  const Settings defaults;
  std::set<std::string> seen;
  for (const auto& info : setting_keys()) {
    EXPECT_TRUE(seen.insert(info.key).second) << info.key;
    EXPECT_EQ(get_setting(defaults, info.key), info.default_value);
    EXPECT_FALSE(info.description.empty()) << info.key;
  }
  for (const char* key : {"degrade.down_factor", "degrade.sigma_s", "degrade.p_edge", "degrade.k_n", "degrade.k_h",
                          "loss.lambda8", "train.lr", "pncc.block", "pncc.step", "model.levels"})
    EXPECT_TRUE(seen.count(key)) << key;
}

TEST(Settings, DocumentedDefaults) {
  const Settings s;
  EXPECT_EQ(get_setting(s, "degrade.down_factor"), "8");
  EXPECT_EQ(get_setting(s, "degrade.sigma_s"), "30");
  EXPECT_EQ(get_setting(s, "degrade.p_edge"), "0.8");
  EXPECT_EQ(get_setting(s, "degrade.k_h"), "0.002");
  EXPECT_EQ(get_setting(s, "train.lr"), "0.001");
  EXPECT_EQ(get_setting(s, "loss.lambda7"), "0.1");
  EXPECT_EQ(get_setting(s, "model.base_channels"), "128");
}

TEST(Settings, ApplyAndReject) {
  Settings s;
  apply_setting(s, "loss.lambda8", "0");
  EXPECT_EQ(s.train.weights[kTriCycle], 0.0);
  apply_setting(s, "train.steps", "5000");
  EXPECT_EQ(s.train.steps, 5000);
  apply_setting(s, "pncc.block", "8");
  EXPECT_EQ(s.pncc.block, 8);
  EXPECT_THROW(apply_setting(s, "train.stepz", "1"), UsageError);
  EXPECT_THROW(apply_setting(s, "train.steps", "1.5"), UsageError);
  EXPECT_THROW(apply_setting(s, "train.steps", ""), UsageError);
  EXPECT_THROW(apply_setting(s, "train.lr", "fast"), UsageError);
  EXPECT_THROW(apply_setting(s, "scene.seed", "-1"), UsageError);
  EXPECT_THROW(get_setting(s, "nope"), UsageError);
}

TEST(Settings, TextFormat) {
  Settings s;
  apply_settings_text(s, "# comment\n\n  train.lr = 0.0002  \nmodel.levels=5 # trailing\n");
  EXPECT_EQ(s.train.lr, 0.0002);
  EXPECT_EQ(s.train.generator.levels, 5);
  try {
    apply_settings_text(s, "train.lr = 1\ntrain.lr = 2\n", "run.cfg");
    FAIL() << "duplicate accepted";
  } catch (const UsageError& e) {
    EXPECT_NE(std::string(e.what()).find("run.cfg:2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(apply_settings_text(s, "no equals sign\n"), UsageError);
  EXPECT_THROW(apply_settings_text(s, "bogus.key = 1\n"), UsageError);
  EXPECT_THROW(apply_settings_file(s, "/nonexistent/tricycle.cfg"), UsageError);
}

TEST(Settings, DumpRoundTrip) {
  Settings s;
  apply_setting(s, "degrade.sigma_s", "12.25");
  apply_setting(s, "loss.lambda3", "0.3");
  apply_setting(s, "train.seed", "18446744073709551615");
  Settings t;
  apply_settings_text(t, dump_settings(s));
  for (const auto& info : setting_keys()) EXPECT_EQ(get_setting(t, info.key), get_setting(s, info.key)) << info.key;
  EXPECT_EQ(t.train.weights[kCycleH], 0.3);
}

}  // namespace
}  // namespace tricycle
