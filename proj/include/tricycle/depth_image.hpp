#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace tricycle {

/// Depth in integer millimetres, rows = height, cols = width. 0 is a hole.
using DepthImage = Eigen::Array<std::uint16_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// 1 where the depth is valid (non-zero), 0 at holes.
using ValidMask = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr std::uint16_t kMaxDepth = 65535;

ValidMask valid_mask(const DepthImage& z);

/// Binary 16-bit PGM (P5, maxval 65535, big-endian samples).
DepthImage load_depth(const std::filesystem::path& path);
void save_depth(const DepthImage& z, const std::filesystem::path& path);
/// Encoded file contents, header included.
std::string encode_pgm(const DepthImage& z);
DepthImage decode_pgm(const std::string& bytes);

/// 8-bit RGB image, row-major, 3 bytes per pixel.
struct ColorImage {
  Eigen::Index width = 0;
  Eigen::Index height = 0;
  std::vector<std::uint8_t> rgb;

  std::array<std::uint8_t, 3> at(Eigen::Index row, Eigen::Index col) const {
    const auto i = static_cast<std::size_t>(3 * (row * width + col));
    return {rgb[i], rgb[i + 1], rgb[i + 2]};
  }
};

/// Colour assigned to holes; never produced by the depth ramp.
inline constexpr std::array<std::uint8_t, 3> kHoleColor{0, 0, 0};

/// Index into the 256-entry depth ramp for a valid depth z (clamped at z_max).
int ramp_index(std::uint16_t z, double z_max);
/// Ramp colour for index 0..255: dark blue -> blue -> cyan -> yellow -> red -> dark red.
std::array<std::uint8_t, 3> ramp_color(int index);

ColorImage colorize(const DepthImage& z, double z_max);
/// Binary PPM (P6, maxval 255).
void save_ppm(const ColorImage& image, const std::filesystem::path& path);

}  // namespace tricycle
