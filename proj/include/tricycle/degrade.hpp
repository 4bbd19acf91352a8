#pragma once

#include <cstdint>

#include "tricycle/depth_image.hpp"
#include "tricycle/random.hpp"

namespace tricycle {

/// Synthetic low-quality sensor model. Depth inside the power laws is in
/// metres; noise amplitudes are in millimetres.
struct DegradeConfig {
  // Structural noise: N(0, sigma_s) drawn per down_factor x down_factor block.
  int down_factor = 8;
  double sigma_s = 30.0;
  // Boundary noise: edge pixels dropped with probability p_edge.
  double p_edge = 0.8;
  double edge_thresh = 100.0;
  // Depth-adaptive noise: sigma(z) = k_n * z^3.
  double k_n = 5.0;
  // Depth-adaptive holes: p(z) = min(1, k_h * z^4).
  double k_h = 0.002;
  std::uint64_t seed = 1;

  /// All stages disabled.
  static DegradeConfig identity();
  void validate() const;
};

DepthImage structural_noise(const DepthImage& z, int down_factor, double sigma_s, Rng& rng);
/// 1 where some valid 4-neighbour differs from a valid pixel by more than edge_thresh.
ValidMask edge_pixels(const DepthImage& z, double edge_thresh);
DepthImage boundary_noise(const DepthImage& z, double p_edge, double edge_thresh, Rng& rng);
DepthImage depth_adaptive_noise(const DepthImage& z, double k_n, Rng& rng);
DepthImage depth_adaptive_holes(const DepthImage& z, double k_h, Rng& rng);

/// structural -> depth-adaptive noise -> boundary -> depth-adaptive holes.
DepthImage degrade(const DepthImage& z, const DegradeConfig& cfg, Rng& rng);

}  // namespace tricycle
