#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tricycle/tensor.hpp"

namespace tricycle {

inline constexpr double kLeakySlope = 0.2;
inline constexpr double kNormEps = 1e-5;

namespace detail {

inline void require_rank4(const Shape& s, const char* what) {
  if (s.rank() != 4) throw ShapeError(std::string(what) + ": expected NCHW tensor, got " + s.str());
}

// Output columns [lo, hi) whose input column ox*stride + kx - 1 lies inside [0, w).
inline std::pair<Index, Index> valid_columns(int kx, int stride, Index w, Index wo) {
  const Index lo = (kx == 0) ? 1 : 0;
  const Index hi = std::min(wo, (w - kx) / stride + 1);
  return {lo, std::max(lo, hi)};
}

// Unfolds one CHW image into a (C*9) x (Ho*Wo) matrix for a 3x3 kernel with
// one pixel of zero padding.
template <typename Scalar>
void im2col(const Scalar* x, Index channels, Index h, Index w, int stride, RowMatrix<Scalar>& cols) {
  const Index ho = h / stride, wo = w / stride;
  for (Index c = 0; c < channels; ++c) {
    const Scalar* plane = x + c * h * w;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const auto [lo, hi] = valid_columns(kx, stride, w, wo);
        Scalar* row = cols.row((c * 3 + ky) * 3 + kx).data();
        for (Index oy = 0; oy < ho; ++oy) {
          const Index iy = oy * stride + ky - 1;
          Scalar* dst = row + oy * wo;
          if (iy < 0 || iy >= h) {
            std::fill(dst, dst + wo, Scalar(0));
            continue;
          }
          const Scalar* src = plane + iy * w + kx - 1;
          std::fill(dst, dst + lo, Scalar(0));
          if (stride == 1) {
            std::copy(src + lo, src + hi, dst + lo);
          } else {
            for (Index ox = lo; ox < hi; ++ox) dst[ox] = src[ox * stride];
          }
          std::fill(dst + hi, dst + wo, Scalar(0));
        }
      }
    }
  }
}

template <typename Scalar>
void col2im_add(const RowMatrix<Scalar>& cols, Index channels, Index h, Index w, int stride, Scalar* dx) {
  const Index ho = h / stride, wo = w / stride;
  for (Index c = 0; c < channels; ++c) {
    Scalar* plane = dx + c * h * w;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const auto [lo, hi] = valid_columns(kx, stride, w, wo);
        const Scalar* row = cols.row((c * 3 + ky) * 3 + kx).data();
        for (Index oy = 0; oy < ho; ++oy) {
          const Index iy = oy * stride + ky - 1;
          if (iy < 0 || iy >= h) continue;
          Scalar* dst = plane + iy * w + kx - 1;
          const Scalar* src = row + oy * wo;
          if (stride == 1) {
            for (Index ox = lo; ox < hi; ++ox) dst[ox] += src[ox];
          } else {
            for (Index ox = lo; ox < hi; ++ox) dst[ox * stride] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace detail

/// 3x3 convolution with zero padding of one pixel. Stride 1 keeps the spatial
/// size, stride 2 halves it (extents must be even).
template <typename Scalar>
Tensor<Scalar> conv2d(Graph<Scalar>& g, const Tensor<Scalar>& x, const Tensor<Scalar>& weight,
                      const Tensor<Scalar>& bias, int stride) {
  detail::require_rank4(x.shape(), "conv2d input");
  detail::require_rank4(weight.shape(), "conv2d weight");
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  if (ws[2] != 3 || ws[3] != 3) throw ShapeError("conv2d: kernel must be 3x3, got " + ws.str());
  if (ws[1] != xs.channels())
    throw ShapeError("conv2d: weight expects " + std::to_string(ws[1]) + " input channels, input has " +
                     std::to_string(xs.channels()));
  if (bias.numel() != ws[0]) throw ShapeError("conv2d: bias length does not match output channels");
  if (stride != 1 && stride != 2) throw ShapeError("conv2d: stride must be 1 or 2");
  if (stride == 2 && (xs.height() % 2 != 0 || xs.width() % 2 != 0))
    throw ShapeError("conv2d: stride 2 needs even spatial extents, got " + xs.str());

  const Index n = xs.batch(), cin = xs.channels(), h = xs.height(), w = xs.width();
  const Index cout = ws[0], ho = h / stride, wo = w / stride;
  const Index k = cin * 9, p = ho * wo;

  ArrayX<Scalar> out(n * cout * p);
  RowMatrix<Scalar> cols(k, p);
  Eigen::Map<const RowMatrix<Scalar>> wm(weight.value().data(), cout, k);
  for (Index b = 0; b < n; ++b) {
    detail::im2col(x.value().data() + b * cin * h * w, cin, h, w, stride, cols);
    Eigen::Map<RowMatrix<Scalar>> y(out.data() + b * cout * p, cout, p);
    y.noalias() = wm * cols;
    y.colwise() += bias.value().matrix();
  }

  auto result = Tensor<Scalar>::constant(nchw(n, cout, ho, wo), std::move(out));
  return g.record(OpKind::Conv2d, result, {x, weight, bias},
                  [=](const ArrayX<Scalar>& gy) {
                    RowMatrix<Scalar> cols(k, p);
                    RowMatrix<Scalar> dcols;
                    Eigen::Map<const RowMatrix<Scalar>> wm(weight.value().data(), cout, k);
                    for (Index b = 0; b < n; ++b) {
                      Eigen::Map<const RowMatrix<Scalar>> gyb(gy.data() + b * cout * p, cout, p);
                      if (weight.requires_grad()) {
                        detail::im2col(x.value().data() + b * cin * h * w, cin, h, w, stride, cols);
                        Eigen::Map<RowMatrix<Scalar>> dw(weight.grad_buffer().data(), cout, k);
                        dw.noalias() += gyb * cols.transpose();
                      }
                      if (bias.requires_grad()) bias.grad_buffer() += gyb.rowwise().sum().array();
                      if (x.requires_grad()) {
                        dcols.noalias() = wm.transpose() * gyb;
                        detail::col2im_add(dcols, cin, h, w, stride, x.grad_buffer().data() + b * cin * h * w);
                      }
                    }
                  });
}

/// max(x, alpha * x); the derivative at exactly 0 is taken as alpha.
template <typename Scalar>
Tensor<Scalar> leaky_relu(Graph<Scalar>& g, const Tensor<Scalar>& x, Scalar alpha = Scalar(kLeakySlope)) {
  ArrayX<Scalar> y = (x.value() > Scalar(0)).select(x.value(), alpha * x.value());
  auto result = Tensor<Scalar>::constant(x.shape(), std::move(y));
  return g.record(OpKind::LeakyRelu, result, {x}, [=](const ArrayX<Scalar>& gy) {
    if (!x.requires_grad()) return;
    x.grad_buffer() += (x.value() > Scalar(0)).select(gy, alpha * gy);
  });
}

/// Per-(sample, channel) normalization with the biased variance estimator,
/// followed by a per-channel affine map.
template <typename Scalar>
Tensor<Scalar> instance_norm(Graph<Scalar>& g, const Tensor<Scalar>& x, const Tensor<Scalar>& gain,
                             const Tensor<Scalar>& shift, Scalar eps = Scalar(kNormEps)) {
  detail::require_rank4(x.shape(), "instance_norm input");
  const Shape& xs = x.shape();
  const Index n = xs.batch(), c = xs.channels(), s = xs.spatial();
  if (s < 2) throw ShapeError("instance_norm: spatial size must be at least 2, got " + xs.str());
  if (gain.numel() != c || shift.numel() != c)
    throw ShapeError("instance_norm: gain/shift length must equal channel count");

  ArrayX<Scalar> y(x.numel());
  ArrayX<Scalar> xhat(x.numel());
  ArrayX<Scalar> inv_std(n * c);
  for (Index b = 0; b < n; ++b) {
    for (Index ch = 0; ch < c; ++ch) {
      const Index slice = b * c + ch;
      auto xv = x.value().segment(slice * s, s);
      const Scalar mean = xv.mean();
      const Scalar var = (xv - mean).square().mean();
      const Scalar is = Scalar(1) / std::sqrt(var + eps);
      inv_std[slice] = is;
      xhat.segment(slice * s, s) = (xv - mean) * is;
      y.segment(slice * s, s) = gain.value()[ch] * xhat.segment(slice * s, s) + shift.value()[ch];
    }
  }

  auto result = Tensor<Scalar>::constant(xs, std::move(y));
  return g.record(OpKind::InstanceNorm, result, {x, gain, shift},
                  [=, xhat = std::move(xhat), inv_std = std::move(inv_std)](const ArrayX<Scalar>& gy) {
                    for (Index b = 0; b < n; ++b) {
                      for (Index ch = 0; ch < c; ++ch) {
                        const Index slice = b * c + ch;
                        auto gys = gy.segment(slice * s, s);
                        auto xh = xhat.segment(slice * s, s);
                        if (gain.requires_grad()) gain.grad_buffer()[ch] += (gys * xh).sum();
                        if (shift.requires_grad()) shift.grad_buffer()[ch] += gys.sum();
                        if (x.requires_grad()) {
                          const ArrayX<Scalar> dxhat = gys * gain.value()[ch];
                          const Scalar sum_d = dxhat.sum();
                          const Scalar sum_dx = (dxhat * xh).sum();
                          x.grad_buffer().segment(slice * s, s) +=
                              (inv_std[slice] / Scalar(s)) * (Scalar(s) * dxhat - sum_d - xh * sum_dx);
                        }
                      }
                    }
                  });
}

/// x2 nearest-neighbour upsampling.
template <typename Scalar>
Tensor<Scalar> upsample_nn(Graph<Scalar>& g, const Tensor<Scalar>& x) {
  detail::require_rank4(x.shape(), "upsample_nn input");
  const Shape& xs = x.shape();
  const Index planes = xs.batch() * xs.channels(), h = xs.height(), w = xs.width();
  ArrayX<Scalar> y(planes * 4 * h * w);
  for (Index p = 0; p < planes; ++p) {
    const Scalar* src = x.value().data() + p * h * w;
    Scalar* dst = y.data() + p * 4 * h * w;
    for (Index yy = 0; yy < 2 * h; ++yy)
      for (Index xx = 0; xx < 2 * w; ++xx) dst[yy * 2 * w + xx] = src[(yy / 2) * w + xx / 2];
  }
  auto result = Tensor<Scalar>::constant(nchw(xs.batch(), xs.channels(), 2 * h, 2 * w), std::move(y));
  return g.record(OpKind::UpsampleNearest, result, {x}, [=](const ArrayX<Scalar>& gy) {
    if (!x.requires_grad()) return;
    ArrayX<Scalar>& dx = x.grad_buffer();
    for (Index p = 0; p < planes; ++p) {
      const Scalar* src = gy.data() + p * 4 * h * w;
      Scalar* dst = dx.data() + p * h * w;
      for (Index yy = 0; yy < 2 * h; ++yy)
        for (Index xx = 0; xx < 2 * w; ++xx) dst[(yy / 2) * w + xx / 2] += src[yy * 2 * w + xx];
    }
  });
}

/// Channel-wise concatenation [a, b].
template <typename Scalar>
Tensor<Scalar> concat_channels(Graph<Scalar>& g, const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::require_rank4(a.shape(), "concat_channels a");
  detail::require_rank4(b.shape(), "concat_channels b");
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (as.batch() != bs.batch() || as.height() != bs.height() || as.width() != bs.width())
    throw ShapeError("concat_channels: mismatched extents " + as.str() + " vs " + bs.str());
  const Index n = as.batch(), ca = as.channels() * as.spatial(), cb = bs.channels() * bs.spatial();
  ArrayX<Scalar> y(n * (ca + cb));
  for (Index i = 0; i < n; ++i) {
    y.segment(i * (ca + cb), ca) = a.value().segment(i * ca, ca);
    y.segment(i * (ca + cb) + ca, cb) = b.value().segment(i * cb, cb);
  }
  auto result = Tensor<Scalar>::constant(nchw(n, as.channels() + bs.channels(), as.height(), as.width()),
                                         std::move(y));
  return g.record(OpKind::ConcatChannels, result, {a, b}, [=](const ArrayX<Scalar>& gy) {
    for (Index i = 0; i < n; ++i) {
      if (a.requires_grad()) a.grad_buffer().segment(i * ca, ca) += gy.segment(i * (ca + cb), ca);
      if (b.requires_grad()) b.grad_buffer().segment(i * cb, cb) += gy.segment(i * (ca + cb) + ca, cb);
    }
  });
}

/// Inverse of concat_channels on values: the first `channels_a` channels and the rest.
template <typename Scalar>
std::pair<Tensor<Scalar>, Tensor<Scalar>> split_channels(const Tensor<Scalar>& x, Index channels_a) {
  detail::require_rank4(x.shape(), "split_channels");
  const Shape& xs = x.shape();
  if (channels_a < 0 || channels_a > xs.channels()) throw ShapeError("split_channels: bad split point");
  const Index n = xs.batch(), s = xs.spatial(), ca = channels_a * s, cb = (xs.channels() - channels_a) * s;
  ArrayX<Scalar> a(n * ca), b(n * cb);
  for (Index i = 0; i < n; ++i) {
    a.segment(i * ca, ca) = x.value().segment(i * (ca + cb), ca);
    b.segment(i * cb, cb) = x.value().segment(i * (ca + cb) + ca, cb);
  }
  return {Tensor<Scalar>::constant(nchw(n, channels_a, xs.height(), xs.width()), std::move(a)),
          Tensor<Scalar>::constant(nchw(n, xs.channels() - channels_a, xs.height(), xs.width()), std::move(b))};
}

/// sum |mask * (a - b)|. The mask is a constant with entries in {0, 1};
/// the subgradient of |.| at 0 is 0.
template <typename Scalar>
Tensor<Scalar> l1_masked(Graph<Scalar>& g, const Tensor<Scalar>& a, const Tensor<Scalar>& b,
                         const Tensor<Scalar>& mask) {
  if (!(a.shape() == b.shape()) || !(a.shape() == mask.shape()))
    throw ShapeError("l1_masked: shapes " + a.shape().str() + ", " + b.shape().str() + ", " +
                     mask.shape().str() + " differ");
  if (!((mask.value() == Scalar(0)) || (mask.value() == Scalar(1))).all())
    throw std::invalid_argument("l1_masked: mask entries must be 0 or 1");
  const ArrayX<Scalar> diff = mask.value() * (a.value() - b.value());
  auto result = Tensor<Scalar>::scalar(diff.abs().sum());
  return g.record(OpKind::L1Masked, result, {a, b}, [=](const ArrayX<Scalar>& gy) {
    const ArrayX<Scalar> s = gy[0] * diff.sign();
    if (a.requires_grad()) a.grad_buffer() += s;
    if (b.requires_grad()) b.grad_buffer() -= s;
  });
}

/// Unmasked L1 distance.
template <typename Scalar>
Tensor<Scalar> l1(Graph<Scalar>& g, const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return l1_masked(g, a, b, Tensor<Scalar>::constant(a.shape(), ArrayX<Scalar>::Ones(a.numel())));
}

/// mean((x - target)^2), the least-squares adversarial criterion.
template <typename Scalar>
Tensor<Scalar> mean_squared_to(Graph<Scalar>& g, const Tensor<Scalar>& x, Scalar target) {
  const ArrayX<Scalar> diff = x.value() - target;
  const Scalar count = static_cast<Scalar>(x.numel());
  auto result = Tensor<Scalar>::scalar(diff.square().sum() / count);
  return g.record(OpKind::MeanSquaredTo, result, {x}, [=](const ArrayX<Scalar>& gy) {
    if (x.requires_grad()) x.grad_buffer() += (Scalar(2) * gy[0] / count) * diff;
  });
}

template <typename Scalar>
Tensor<Scalar> scale(Graph<Scalar>& g, const Tensor<Scalar>& x, Scalar factor) {
  auto result = Tensor<Scalar>::constant(x.shape(), factor * x.value());
  return g.record(OpKind::Scale, result, {x}, [=](const ArrayX<Scalar>& gy) {
    if (x.requires_grad()) x.grad_buffer() += factor * gy;
  });
}

template <typename Scalar>
Tensor<Scalar> sum(Graph<Scalar>& g, const Tensor<Scalar>& x) {
  auto result = Tensor<Scalar>::scalar(x.value().sum());
  return g.record(OpKind::Sum, result, {x}, [=](const ArrayX<Scalar>& gy) {
    if (x.requires_grad()) x.grad_buffer() += gy[0];
  });
}

/// sum_i weights[i] * terms[i] over scalar terms, accumulated left to right.
/// Terms with zero weight receive no gradient at all, so the subgraph that
/// produced them is skipped by backward().
template <typename Scalar>
Tensor<Scalar> weighted_sum(Graph<Scalar>& g, std::span<const Tensor<Scalar>> terms,
                            std::span<const Scalar> weights) {
  if (terms.size() != weights.size()) throw ShapeError("weighted_sum: term/weight count mismatch");
  Scalar total(0);
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (terms[i].numel() != 1) throw ShapeError("weighted_sum: terms must be scalars");
    total += weights[i] * terms[i].item();
  }
  std::vector<Tensor<Scalar>> inputs(terms.begin(), terms.end());
  std::vector<Scalar> w(weights.begin(), weights.end());
  auto result = Tensor<Scalar>::scalar(total);
  return g.record(OpKind::WeightedSum, result, inputs, [inputs, w](const ArrayX<Scalar>& gy) {
    for (std::size_t i = 0; i < inputs.size(); ++i)
      if (w[i] != Scalar(0) && inputs[i].requires_grad()) inputs[i].grad_buffer()[0] += w[i] * gy[0];
  });
}

}  // namespace tricycle
