#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "tricycle/degrade.hpp"
#include "tricycle/metrics.hpp"
#include "tricycle/scene.hpp"
#include "tricycle/trainer.hpp"

namespace tricycle {

/// Every tunable value of the command-line tool.
struct Settings {
  SceneGenConfig scene;
  DegradeConfig degrade;
  TrainConfig train;
  PnccConfig pncc;
};

struct SettingInfo {
  std::string key;
  std::string default_value;
  std::string description;
};

/// All recognised keys in a stable order, with their defaults.
std::vector<SettingInfo> setting_keys();

/// Sets one dotted key. Throws UsageError for unknown keys or bad values.
void apply_setting(Settings& settings, std::string_view key, std::string_view value);
std::string get_setting(const Settings& settings, std::string_view key);

/// Applies a "key = value" file. Blank lines and '#' comments are ignored;
/// repeated keys are rejected.
void apply_settings_text(Settings& settings, std::string_view text, std::string_view origin = "<config>");
void apply_settings_file(Settings& settings, const std::filesystem::path& path);

/// "key = value" text for every key, loadable by apply_settings_text.
std::string dump_settings(const Settings& settings);

}  // namespace tricycle
