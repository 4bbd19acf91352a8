#pragma once

#include <cstdint>

#include "tricycle/dataset.hpp"
#include "tricycle/depth_image.hpp"
#include "tricycle/random.hpp"

namespace tricycle {

/// Procedural clean-scene generator settings.
///
/// A scene is a tilted background plane with a random number of primitives
/// (rectangles, ellipses, tilted planar patches) in front of it; each pixel
/// keeps the nearest surface.
struct SceneGenConfig {
  Eigen::Index size = 128;
  int min_objects = 2;
  int max_objects = 6;
  double z_near = 500.0;   // mm
  double z_far = 2600.0;   // mm
  double weight_rect = 1.0;
  double weight_ellipse = 1.0;
  double weight_plane = 1.0;
  std::uint64_t seed = 1;
  int max_attempts = 100;  // resampling budget for the acceptance filter
  FilterConfig filter;

  void validate() const;
};

/// One scene, without the acceptance filter.
DepthImage draw_scene(const SceneGenConfig& cfg, Rng& rng);

/// Draws scenes until one passes `cfg.filter` (or the attempt budget runs out,
/// in which case the last draw is returned).
DepthImage generate_scene(const SceneGenConfig& cfg, Rng& rng);

}  // namespace tricycle
