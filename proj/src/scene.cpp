#include "tricycle/scene.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tricycle {

void SceneGenConfig::validate() const {
  if (size < 1) throw std::invalid_argument("scene: size must be positive");
  if (min_objects < 0 || max_objects < min_objects) throw std::invalid_argument("scene: bad object count range");
  if (z_near < 1 || z_far > kMaxDepth || z_far <= z_near) throw std::invalid_argument("scene: bad depth range");
  if (weight_rect < 0 || weight_ellipse < 0 || weight_plane < 0 ||
      weight_rect + weight_ellipse + weight_plane <= 0)
    throw std::invalid_argument("scene: primitive weights must be non-negative with positive sum");
  if (max_attempts < 1) throw std::invalid_argument("scene: max_attempts must be positive");
}

namespace {

enum class Primitive { Rect, Ellipse, Plane };

Primitive pick_primitive(const SceneGenConfig& cfg, Rng& rng) {
  const double total = cfg.weight_rect + cfg.weight_ellipse + cfg.weight_plane;
  const double u = rng.uniform() * total;
  if (u < cfg.weight_rect) return Primitive::Rect;
  if (u < cfg.weight_rect + cfg.weight_ellipse) return Primitive::Ellipse;
  return Primitive::Plane;
}

}  // namespace

DepthImage draw_scene(const SceneGenConfig& cfg, Rng& rng) {
  cfg.validate();
  const Eigen::Index n = cfg.size;
  const double range = cfg.z_far - cfg.z_near;
  const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;

  Eigen::ArrayXXd depth(n, n);
  const double base = rng.uniform(cfg.z_near + 0.27 * range, cfg.z_near + 0.73 * range);
  const double grad_x = rng.uniform(-0.27 * range, 0.27 * range);
  const double grad_y = rng.uniform(-0.27 * range, 0.27 * range);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < n; ++c)
      depth(r, c) = base + grad_x * (c / denom - 0.5) + grad_y * (r / denom - 0.5);

  const int count = static_cast<int>(rng.uniform_int(cfg.min_objects, cfg.max_objects));
  for (int k = 0; k < count; ++k) {
    const Primitive kind = pick_primitive(cfg, rng);
    const double cy = rng.uniform(0.0, static_cast<double>(n));
    const double cx = rng.uniform(0.0, static_cast<double>(n));
    const double hy = rng.uniform(0.08, 0.3) * n;
    const double hx = rng.uniform(0.08, 0.3) * n;
    const double d = rng.uniform(cfg.z_near, std::max(cfg.z_near + 1.0, base - 300.0));
    // Planar patches get a depth slope (mm per pixel); the region is elliptic
    // or rectangular with equal odds.
    double slope_x = 0.0, slope_y = 0.0;
    bool elliptic = kind == Primitive::Ellipse;
    if (kind == Primitive::Plane) {
      slope_x = rng.uniform(-0.6, 0.6) * range / n;
      slope_y = rng.uniform(-0.6, 0.6) * range / n;
      elliptic = rng.bernoulli(0.5);
    }
    const auto r0 = std::max<Eigen::Index>(0, static_cast<Eigen::Index>(std::floor(cy - hy)));
    const auto r1 = std::min<Eigen::Index>(n - 1, static_cast<Eigen::Index>(std::ceil(cy + hy)));
    const auto c0 = std::max<Eigen::Index>(0, static_cast<Eigen::Index>(std::floor(cx - hx)));
    const auto c1 = std::min<Eigen::Index>(n - 1, static_cast<Eigen::Index>(std::ceil(cx + hx)));
    for (Eigen::Index r = r0; r <= r1; ++r) {
      for (Eigen::Index c = c0; c <= c1; ++c) {
        const double dy = (r + 0.5 - cy) / hy, dx = (c + 0.5 - cx) / hx;
        const bool inside = elliptic ? dx * dx + dy * dy <= 1.0 : std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
        if (!inside) continue;
        const double z = std::max(cfg.z_near, d + slope_x * (c + 0.5 - cx) + slope_y * (r + 0.5 - cy));
        depth(r, c) = std::min(depth(r, c), z);
      }
    }
  }

  DepthImage out(n, n);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < n; ++c) {
      const double z = std::clamp(depth(r, c), cfg.z_near, cfg.z_far);
      out(r, c) = static_cast<std::uint16_t>(std::clamp<long>(std::lround(z), 1, kMaxDepth));
    }
  return out;
}

DepthImage generate_scene(const SceneGenConfig& cfg, Rng& rng) {
  DepthImage scene;
  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    scene = draw_scene(cfg, rng);
    if (accept_scene(scene, cfg.filter)) break;
  }
  return scene;
}

}  // namespace tricycle
