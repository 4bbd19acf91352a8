#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tricycle/depth_image.hpp"
#include "tricycle/random.hpp"

namespace tricycle {

/// Rejection rules for training scenes: too flat, or too much far content.
struct FilterConfig {
  double sigma_min = 400.0;    // mm, std-dev of valid pixels
  double far_thresh = 5000.0;  // mm
  double far_frac = 0.15;      // max fraction of all pixels beyond far_thresh
};

struct DepthStats {
  double valid_stddev = 0.0;  // population std-dev over valid pixels (0 if none)
  double far_fraction = 0.0;  // over all pixels
};

DepthStats depth_stats(const DepthImage& z, double far_thresh);
bool accept_scene(const DepthImage& z, const FilterConfig& cfg = {});
/// Indices of accepted images, in input order.
std::vector<std::size_t> filter_dataset(std::span<const DepthImage> images, const FilterConfig& cfg = {});

/// Parameters of one augmentation draw.
struct AugmentParams {
  Eigen::Index crop_row = 0;
  Eigen::Index crop_col = 0;
  int quarter_turns = 0;  // counter-clockwise, 0..3
  bool flip_horizontal = false;
  bool flip_vertical = false;
  int depth_shift = 0;  // mm, applied to valid pixels only
};

struct AugmentConfig {
  Eigen::Index crop_size = 128;
  int max_depth_shift = 500;
};

AugmentParams sample_augment(const DepthImage& z, const AugmentConfig& cfg, Rng& rng);
/// crop -> rotate -> flips -> depth shift (clamped to [1, 65535], holes kept).
DepthImage apply_augment(const DepthImage& z, Eigen::Index crop_size, const AugmentParams& p);
DepthImage augment(const DepthImage& z, const AugmentConfig& cfg, Rng& rng);

/// Counter-clockwise rotation by 90 degrees.
DepthImage rotate90(const DepthImage& z);

enum class Domain { Low, High };

/// List of depth images of one domain, optionally paired with clean references.
///
/// Text format: one entry per line, `path` or `reference<TAB>path`, '#'
/// starts a comment. A `# domain: L` or `# domain: H` comment sets the domain.
/// Relative paths resolve against the manifest's directory.
struct DatasetManifest {
  Domain domain = Domain::Low;
  std::vector<std::filesystem::path> paths;
  std::vector<std::filesystem::path> references;  // empty, or one per path

  static DatasetManifest load(const std::filesystem::path& file, std::optional<Domain> domain = std::nullopt);
  void save(const std::filesystem::path& file) const;
  std::vector<DepthImage> load_images() const;
};

}  // namespace tricycle
