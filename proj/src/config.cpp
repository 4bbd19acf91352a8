#include "tricycle/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <type_traits>

#include "tricycle/errors.hpp"

namespace tricycle {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_value(std::string_view key, std::string_view text) {
  T out{};
  const char* begin = text.data();
  const char* end = begin + text.size();
  std::from_chars_result r;
  if constexpr (std::is_floating_point_v<T>) {
    r = std::from_chars(begin, end, out, std::chars_format::general);
  } else {
    r = std::from_chars(begin, end, out);
  }
  if (text.empty() || r.ec != std::errc() || r.ptr != end)
    throw UsageError("invalid value '" + std::string(text) + "' for " + std::string(key));
  return out;
}

template <typename T>
std::string format_value(T v) {
  if constexpr (std::is_floating_point_v<T>) {
    // Shortest form that reads back identically.
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
  } else {
    return std::to_string(v);
  }
}

struct Entry {
  std::string key;
  std::string description;
  std::function<void(Settings&, std::string_view)> set;
  std::function<std::string(const Settings&)> get;
};

// Builds an entry from an accessor returning a reference to the field.
template <typename Access>
Entry field(std::string key, std::string description, Access access) {
  using T = std::remove_reference_t<decltype(access(std::declval<Settings&>()))>;
  Entry e;
  e.key = key;
  e.description = std::move(description);
  e.set = [access, key](Settings& s, std::string_view v) { access(s) = parse_value<T>(key, v); };
  e.get = [access](const Settings& s) { return format_value(access(const_cast<Settings&>(s))); };
  return e;
}

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = [] {
    std::vector<Entry> t;
    t.push_back(field("scene.size", "side length of generated scenes (px)", [](Settings& s) -> auto& { return s.scene.size; }));
    t.push_back(field("scene.min_objects", "fewest primitives per scene", [](Settings& s) -> auto& { return s.scene.min_objects; }));
    t.push_back(field("scene.max_objects", "most primitives per scene", [](Settings& s) -> auto& { return s.scene.max_objects; }));
    t.push_back(field("scene.z_near", "nearest scene depth (mm)", [](Settings& s) -> auto& { return s.scene.z_near; }));
    t.push_back(field("scene.z_far", "farthest scene depth (mm)", [](Settings& s) -> auto& { return s.scene.z_far; }));
    t.push_back(field("scene.weight_rect", "relative frequency of boxes", [](Settings& s) -> auto& { return s.scene.weight_rect; }));
    t.push_back(field("scene.weight_ellipse", "relative frequency of ellipses", [](Settings& s) -> auto& { return s.scene.weight_ellipse; }));
    t.push_back(field("scene.weight_plane", "relative frequency of tilted planes", [](Settings& s) -> auto& { return s.scene.weight_plane; }));
    t.push_back(field("scene.seed", "scene generator seed", [](Settings& s) -> auto& { return s.scene.seed; }));
    t.push_back(field("scene.max_attempts", "redraws allowed per scene before giving up on the filter", [](Settings& s) -> auto& { return s.scene.max_attempts; }));
    t.push_back(field("filter.sigma_min", "reject scenes whose valid-depth std-dev is below this (mm)", [](Settings& s) -> auto& { return s.scene.filter.sigma_min; }));
    t.push_back(field("filter.far_thresh", "depth counted as far (mm)", [](Settings& s) -> auto& { return s.scene.filter.far_thresh; }));
    t.push_back(field("filter.far_frac", "reject scenes with more than this fraction of far pixels", [](Settings& s) -> auto& { return s.scene.filter.far_frac; }));
    t.push_back(field("degrade.down_factor", "block size of structural noise (px)", [](Settings& s) -> auto& { return s.degrade.down_factor; }));
    t.push_back(field("degrade.sigma_s", "structural noise std-dev (mm)", [](Settings& s) -> auto& { return s.degrade.sigma_s; }));
    t.push_back(field("degrade.p_edge", "probability of dropping an edge pixel", [](Settings& s) -> auto& { return s.degrade.p_edge; }));
    t.push_back(field("degrade.edge_thresh", "neighbour depth jump that marks an edge (mm)", [](Settings& s) -> auto& { return s.degrade.edge_thresh; }));
    t.push_back(field("degrade.k_n", "depth noise coefficient (mm per m^3)", [](Settings& s) -> auto& { return s.degrade.k_n; }));
    t.push_back(field("degrade.k_h", "hole probability coefficient (per m^4)", [](Settings& s) -> auto& { return s.degrade.k_h; }));
    t.push_back(field("degrade.seed", "degradation seed", [](Settings& s) -> auto& { return s.degrade.seed; }));
    t.push_back(field("model.levels", "generator resolutions, bottleneck included", [](Settings& s) -> auto& { return s.train.generator.levels; }));
    t.push_back(field("model.base_channels", "generator feature channels", [](Settings& s) -> auto& { return s.train.generator.base_channels; }));
    t.push_back(field("model.norm_eps", "instance norm epsilon", [](Settings& s) -> auto& { return s.train.generator.norm_eps; }));
    t.push_back(field("disc.layers", "discriminator stride-2 blocks", [](Settings& s) -> auto& { return s.train.discriminator.layers; }));
    t.push_back(field("disc.base_channels", "discriminator channels in the first block", [](Settings& s) -> auto& { return s.train.discriminator.base_channels; }));
    static const char* term_help[kTermCount] = {
        "weight of the adversarial term for the high-quality domain",
        "weight of the adversarial term for the low-quality domain",
        "weight of the high-low-high cycle term",
        "weight of the low-high-low cycle term",
        "weight of the high-quality identity term",
        "weight of the low-quality identity term",
        "weight of the depth-preservation term",
        "weight of the low-high-low-high cycle term",
    };
    for (int i = 0; i < kTermCount; ++i) {
      t.push_back(field("loss.lambda" + std::to_string(i + 1), term_help[i],
                        [i](Settings& s) -> auto& { return s.train.weights[i]; }));
    }
    t.push_back(field("train.lr", "ADAM learning rate", [](Settings& s) -> auto& { return s.train.lr; }));
    t.push_back(field("train.batch_size", "images per step (only 1 is supported)", [](Settings& s) -> auto& { return s.train.batch_size; }));
    t.push_back(field("train.steps", "total optimisation steps", [](Settings& s) -> auto& { return s.train.steps; }));
    t.push_back(field("train.seed", "initialisation and sampling seed", [](Settings& s) -> auto& { return s.train.seed; }));
    t.push_back(field("train.crop_size", "training crop side (px)", [](Settings& s) -> auto& { return s.train.crop_size; }));
    t.push_back(field("train.z_max", "depth mapped to 1.0 at the network input (mm)", [](Settings& s) -> auto& { return s.train.z_max; }));
    t.push_back(field("train.max_depth_shift", "largest random depth shift during augmentation (mm)", [](Settings& s) -> auto& { return s.train.max_depth_shift; }));
    t.push_back(field("train.checkpoint_interval", "steps between checkpoints (0: final only)", [](Settings& s) -> auto& { return s.train.checkpoint_interval; }));
    t.push_back(field("train.log_interval", "steps between log rows (0: none)", [](Settings& s) -> auto& { return s.train.log_interval; }));
    t.push_back(field("pncc.block", "patch side for PNCC (px)", [](Settings& s) -> auto& { return s.pncc.block; }));
    t.push_back(field("pncc.step", "patch stride for PNCC (px)", [](Settings& s) -> auto& { return s.pncc.step; }));
    t.push_back(field("pncc.constancy_eps", "variance below which a patch counts as constant", [](Settings& s) -> auto& { return s.pncc.constancy_eps; }));
    return t;
  }();
  return table;
}

const Entry& lookup(std::string_view key) {
  for (const auto& e : entries())
    if (e.key == key) return e;
  throw UsageError("unknown configuration key '" + std::string(key) + "'");
}

}  // namespace

std::vector<SettingInfo> setting_keys() {
  const Settings defaults;
  std::vector<SettingInfo> out;
  for (const auto& e : entries()) out.push_back({e.key, e.get(defaults), e.description});
  return out;
}

void apply_setting(Settings& settings, std::string_view key, std::string_view value) {
  lookup(key).set(settings, trim(value));
}

std::string get_setting(const Settings& settings, std::string_view key) { return lookup(key).get(settings); }

void apply_settings_text(Settings& settings, std::string_view text, std::string_view origin) {
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto where = std::string(origin) + ":" + std::to_string(line_no) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw UsageError(where + "expected key = value");
    const std::string_view key = trim(line.substr(0, eq));
    if (!seen.insert(std::string(key)).second) throw UsageError(where + "duplicate key '" + std::string(key) + "'");
    try {
      apply_setting(settings, key, line.substr(eq + 1));
    } catch (const UsageError& e) {
      throw UsageError(where + e.what());
    }
  }
}

void apply_settings_file(Settings& settings, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  apply_settings_text(settings, buf.str(), path.string());
}

std::string dump_settings(const Settings& settings) {
  std::string out;
  for (const auto& e : entries()) out += e.key + " = " + e.get(settings) + "\n";
  return out;
}

}  // namespace tricycle
