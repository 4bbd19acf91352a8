#pragma once

#include <algorithm>
#include <cmath>

#include "tricycle/depth_image.hpp"
#include "tricycle/models.hpp"

namespace tricycle {

inline constexpr double kDefaultZMax = 8000.0;

/// 1 x 1 x H x W tensor of z / z_max; holes stay exactly 0.
template <typename Scalar>
Tensor<Scalar> depth_to_tensor(const DepthImage& z, double z_max) {
  ArrayX<Scalar> v(z.size());
  for (Index i = 0; i < z.size(); ++i) v[i] = static_cast<Scalar>(z.data()[i] / z_max);
  return Tensor<Scalar>::constant(nchw(1, 1, z.rows(), z.cols()), std::move(v));
}

/// Inverse of depth_to_tensor with the output contract: clamp to [0, 1],
/// scale by z_max, and map anything below half a millimetre to a hole.
template <typename Scalar>
DepthImage tensor_to_depth(const Tensor<Scalar>& t, double z_max) {
  const Shape& s = t.shape();
  if (s.rank() != 4 || s.batch() != 1 || s.channels() != 1) throw ShapeError("tensor_to_depth: expected 1x1xHxW");
  DepthImage z(s.height(), s.width());
  for (Index i = 0; i < z.size(); ++i) {
    const double mm = std::clamp(static_cast<double>(t.value()[i]), 0.0, 1.0) * z_max;
    z.data()[i] = mm < 0.5 ? 0 : static_cast<std::uint16_t>(std::min<long>(std::lround(mm), kMaxDepth));
  }
  return z;
}

/// Index into [0, n) reflecting about the borders without repeating the edge.
inline Index reflect_index(Index i, Index n) {
  if (n == 1) return 0;
  const Index period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

/// Reflect-pads bottom/right up to multiples of `multiple`.
inline DepthImage reflect_pad(const DepthImage& z, Index multiple) {
  const Index h = (z.rows() + multiple - 1) / multiple * multiple;
  const Index w = (z.cols() + multiple - 1) / multiple * multiple;
  if (h == z.rows() && w == z.cols()) return z;
  DepthImage out(h, w);
  for (Index r = 0; r < h; ++r)
    for (Index c = 0; c < w; ++c) out(r, c) = z(reflect_index(r, z.rows()), reflect_index(c, z.cols()));
  return out;
}

/// Runs the low-to-high generator on an image of any size.
template <typename Scalar>
DepthImage enhance(const Generator<Scalar>& generator, const DepthImage& z, double z_max = kDefaultZMax) {
  if (z.size() == 0) return z;
  const DepthImage padded = reflect_pad(z, generator.config().granularity());
  Graph<Scalar> graph(false);
  const Tensor<Scalar> y = generator.forward(graph, depth_to_tensor<Scalar>(padded, z_max));
  const DepthImage full = tensor_to_depth(y, z_max);
  return full.topLeftCorner(z.rows(), z.cols());
}

}  // namespace tricycle
