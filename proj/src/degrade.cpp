#include "tricycle/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "tricycle/errors.hpp"

namespace tricycle {

DegradeConfig DegradeConfig::identity() {
  DegradeConfig c;
  c.sigma_s = 0.0;
  c.p_edge = 0.0;
  c.k_n = 0.0;
  c.k_h = 0.0;
  return c;
}

void DegradeConfig::validate() const {
  if (down_factor < 2) throw std::invalid_argument("degrade: down_factor must be at least 2");
  if (sigma_s < 0 || k_n < 0 || k_h < 0) throw std::invalid_argument("degrade: noise constants must be non-negative");
  if (p_edge < 0 || p_edge > 1) throw std::invalid_argument("degrade: p_edge must lie in [0, 1]");
  if (edge_thresh < 0) throw std::invalid_argument("degrade: edge_thresh must be non-negative");
}

namespace {

// Adds an offset to a valid pixel, keeping it valid and in range.
std::uint16_t shifted(std::uint16_t v, long offset) {
  return static_cast<std::uint16_t>(std::clamp<long>(static_cast<long>(v) + offset, 1, kMaxDepth));
}

double metres(std::uint16_t v) { return static_cast<double>(v) * 1e-3; }

}  // namespace

DepthImage structural_noise(const DepthImage& z, int down_factor, double sigma_s, Rng& rng) {
  if (down_factor < 1 || z.rows() % down_factor != 0 || z.cols() % down_factor != 0)
    throw ShapeError("structural_noise: image " + std::to_string(z.rows()) + "x" + std::to_string(z.cols()) +
                     " not divisible by " + std::to_string(down_factor));
  DepthImage out = z;
  if (sigma_s == 0.0) return out;
  const Eigen::Index br = z.rows() / down_factor, bc = z.cols() / down_factor;
  Eigen::Array<long, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> offsets(br, bc);
  for (Eigen::Index i = 0; i < offsets.size(); ++i) offsets.data()[i] = std::lround(rng.normal(0.0, sigma_s));
  for (Eigen::Index r = 0; r < z.rows(); ++r)
    for (Eigen::Index c = 0; c < z.cols(); ++c)
      if (z(r, c) != 0) out(r, c) = shifted(z(r, c), offsets(r / down_factor, c / down_factor));
  return out;
}

ValidMask edge_pixels(const DepthImage& z, double edge_thresh) {
  ValidMask edges = ValidMask::Zero(z.rows(), z.cols());
  const Eigen::Index h = z.rows(), w = z.cols();
  for (Eigen::Index r = 0; r < h; ++r) {
    for (Eigen::Index c = 0; c < w; ++c) {
      const std::uint16_t v = z(r, c);
      if (v == 0) continue;
      auto differs = [&](Eigen::Index rr, Eigen::Index cc) {
        if (rr < 0 || rr >= h || cc < 0 || cc >= w) return false;
        const std::uint16_t u = z(rr, cc);
        return u != 0 && std::abs(static_cast<double>(u) - v) > edge_thresh;
      };
      if (differs(r - 1, c) || differs(r + 1, c) || differs(r, c - 1) || differs(r, c + 1)) edges(r, c) = 1;
    }
  }
  return edges;
}

DepthImage boundary_noise(const DepthImage& z, double p_edge, double edge_thresh, Rng& rng) {
  DepthImage out = z;
  if (p_edge == 0.0) return out;
  const ValidMask edges = edge_pixels(z, edge_thresh);
  for (Eigen::Index i = 0; i < z.size(); ++i)
    if (edges.data()[i] && rng.bernoulli(p_edge)) out.data()[i] = 0;
  return out;
}

DepthImage depth_adaptive_noise(const DepthImage& z, double k_n, Rng& rng) {
  DepthImage out = z;
  if (k_n == 0.0) return out;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const std::uint16_t v = z.data()[i];
    if (v == 0) continue;
    const double m = metres(v);
    out.data()[i] = shifted(v, std::lround(rng.normal(0.0, k_n * m * m * m)));
  }
  return out;
}

DepthImage depth_adaptive_holes(const DepthImage& z, double k_h, Rng& rng) {
  DepthImage out = z;
  if (k_h == 0.0) return out;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const std::uint16_t v = z.data()[i];
    if (v == 0) continue;
    const double m = metres(v);
    const double p = std::min(1.0, k_h * m * m * m * m);
    if (rng.bernoulli(p)) out.data()[i] = 0;
  }
  return out;
}

DepthImage degrade(const DepthImage& z, const DegradeConfig& cfg, Rng& rng) {
  cfg.validate();
  DepthImage out = structural_noise(z, cfg.down_factor, cfg.sigma_s, rng);
  out = depth_adaptive_noise(out, cfg.k_n, rng);
  out = boundary_noise(out, cfg.p_edge, cfg.edge_thresh, rng);
  return depth_adaptive_holes(out, cfg.k_h, rng);
}

}  // namespace tricycle
