#pragma once

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "tricycle/ops.hpp"
#include "tricycle/random.hpp"
#include "tricycle/tensor.hpp"

namespace tricycle {

struct GeneratorConfig {
  /// Number of resolutions, including the full one (7 gives 128 -> 2).
  int levels = 7;
  Index base_channels = 128;
  /// Training input size (square).
  Index input_size = 128;
  double norm_eps = kNormEps;

  Index granularity() const { return Index(1) << (levels - 1); }

  void validate() const {
    if (levels < 1 || levels > 16) throw ShapeError("generator: levels must be in 1..16");
    if (base_channels < 1) throw ShapeError("generator: base_channels must be positive");
    if (input_size < 1 || input_size % granularity() != 0)
      throw ShapeError("generator: input size " + std::to_string(input_size) + " not divisible by " +
                       std::to_string(granularity()));
  }
};

struct DiscriminatorConfig {
  int layers = 4;
  Index base_channels = 64;

  void validate() const {
    if (layers < 1 || layers > 12) throw ShapeError("discriminator: layers must be in 1..12");
    if (base_channels < 1) throw ShapeError("discriminator: base_channels must be positive");
  }
};

template <typename Scalar>
struct NamedParameter {
  std::string name;
  Tensor<Scalar> tensor;
};

/// Output extents of every named layer of one forward pass.
using LayerTrace = std::vector<std::pair<std::string, Shape>>;

/// 3x3 convolution optionally followed by Leaky ReLU and instance norm.
template <typename Scalar>
struct ConvBlock {
  std::string name;
  int stride = 1;
  bool activated = true;  // Leaky ReLU + instance norm after the convolution
  bool normalized = true;
  Tensor<Scalar> weight, bias, gain, shift;

  static ConvBlock create(std::string name, Index in_ch, Index out_ch, int stride, bool activated,
                          bool normalized, Rng& rng) {
    ConvBlock b;
    b.name = std::move(name);
    b.stride = stride;
    b.activated = activated;
    b.normalized = activated && normalized;
    ArrayX<Scalar> w(out_ch * in_ch * 9);
    for (Index i = 0; i < w.size(); ++i) w[i] = static_cast<Scalar>(rng.normal(0.0, 0.02));
    b.weight = Tensor<Scalar>::parameter(nchw(out_ch, in_ch, 3, 3), std::move(w));
    b.bias = Tensor<Scalar>::parameter(Shape{out_ch}, ArrayX<Scalar>::Zero(out_ch));
    if (b.normalized) {
      b.gain = Tensor<Scalar>::parameter(Shape{out_ch}, ArrayX<Scalar>::Ones(out_ch));
      b.shift = Tensor<Scalar>::parameter(Shape{out_ch}, ArrayX<Scalar>::Zero(out_ch));
    }
    return b;
  }

  Tensor<Scalar> operator()(Graph<Scalar>& g, const Tensor<Scalar>& x, Scalar eps) const {
    Tensor<Scalar> y = conv2d(g, x, weight, bias, stride);
    if (!activated) return y;
    y = leaky_relu(g, y);
    if (normalized) y = instance_norm(g, y, gain, shift, eps);
    return y;
  }

  void append_parameters(std::vector<NamedParameter<Scalar>>& out) const {
    out.push_back({name + ".weight", weight});
    out.push_back({name + ".bias", bias});
    if (normalized) {
      out.push_back({name + ".gain", gain});
      out.push_back({name + ".shift", shift});
    }
  }
};

/// U-Net generator.
///
/// Encoder: conv1 at full resolution, then per level k = 2..levels a stride-2
/// block "convk.1" and a stride-1 block "convk.2". Decoder, from the
/// bottleneck up: "convk.3" consumes [up(previous), skip(convk.2)] where the
/// skip pathway is a size-maintaining block; "convk.4" follows. At the full
/// resolution the skip source is conv1 and "conv1.4" is a linear 1-channel
/// projection. With levels = 7 and 128 channels this is the 26-row layout
/// input, conv1, conv2.1 ... conv7.2, conv6.3 ... conv1.4.
template <typename Scalar>
class Generator {
 public:
  Generator() = default;

  Generator(const GeneratorConfig& cfg, Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    const Index c = cfg_.base_channels;
    encoder_.push_back(ConvBlock<Scalar>::create("conv1", 1, c, 1, true, true, rng));
    for (int k = 2; k <= cfg_.levels; ++k) {
      encoder_.push_back(ConvBlock<Scalar>::create(layer(k, 1), c, c, 2, true, true, rng));
      encoder_.push_back(ConvBlock<Scalar>::create(layer(k, 2), c, c, 1, true, true, rng));
    }
    for (int k = cfg_.levels - 1; k >= 1; --k) {
      skips_.push_back(ConvBlock<Scalar>::create("conv" + std::to_string(k) + ".skip", c, c, 1, true, true, rng));
      decoder_.push_back(ConvBlock<Scalar>::create(layer(k, 3), 2 * c, c, 1, true, true, rng));
      const bool last = (k == 1);
      decoder_.push_back(ConvBlock<Scalar>::create(layer(k, 4), c, last ? 1 : c, 1, !last, !last, rng));
    }
    if (cfg_.levels == 1) {
      // Degenerate single-resolution network: conv1 followed by the projection.
      decoder_.push_back(ConvBlock<Scalar>::create("conv1.4", c, 1, 1, false, false, rng));
    }
  }

  const GeneratorConfig& config() const { return cfg_; }

  Tensor<Scalar> forward(Graph<Scalar>& g, const Tensor<Scalar>& x, LayerTrace* trace = nullptr) const {
    detail::require_rank4(x.shape(), "generator input");
    if (x.shape().channels() != 1) throw ShapeError("generator: input must have one channel");
    const Index gran = cfg_.granularity();
    if (x.shape().height() % gran != 0 || x.shape().width() % gran != 0)
      throw ShapeError("generator: input " + x.shape().str() + " not divisible by " + std::to_string(gran));

    const Scalar eps = static_cast<Scalar>(cfg_.norm_eps);
    auto note = [&](const std::string& name, const Tensor<Scalar>& t) {
      if (trace) trace->emplace_back(name, t.shape());
    };
    note("input", x);

    // Skip sources, finest first: conv1, conv2.2, conv3.2, ...
    std::vector<Tensor<Scalar>> sources;
    Tensor<Scalar> h = encoder_[0](g, x, eps);
    note(encoder_[0].name, h);
    sources.push_back(h);
    for (std::size_t i = 1; i < encoder_.size(); ++i) {
      h = encoder_[i](g, h, eps);
      note(encoder_[i].name, h);
      if (i % 2 == 0) sources.push_back(h);
    }
    if (cfg_.levels == 1) {
      h = decoder_[0](g, h, eps);
      note(decoder_[0].name, h);
      return h;
    }
    for (std::size_t j = 0; j < skips_.size(); ++j) {
      const std::size_t level_index = skips_.size() - 1 - j;  // k - 1
      const Tensor<Scalar> skip = skips_[j](g, sources[level_index], eps);
      h = concat_channels(g, upsample_nn(g, h), skip);
      h = decoder_[2 * j](g, h, eps);
      note(decoder_[2 * j].name, h);
      h = decoder_[2 * j + 1](g, h, eps);
      note(decoder_[2 * j + 1].name, h);
    }
    return h;
  }

  Tensor<Scalar> operator()(Graph<Scalar>& g, const Tensor<Scalar>& x) const { return forward(g, x); }

  /// Parameters in a fixed order with unique names.
  std::vector<NamedParameter<Scalar>> named_parameters() const {
    std::vector<NamedParameter<Scalar>> out;
    for (const auto& b : encoder_) b.append_parameters(out);
    for (std::size_t j = 0; j < skips_.size(); ++j) {
      skips_[j].append_parameters(out);
      decoder_[2 * j].append_parameters(out);
      decoder_[2 * j + 1].append_parameters(out);
    }
    if (cfg_.levels == 1) decoder_[0].append_parameters(out);
    return out;
  }

  std::vector<Tensor<Scalar>> parameters() const {
    std::vector<Tensor<Scalar>> out;
    for (auto& p : named_parameters()) out.push_back(p.tensor);
    return out;
  }

 private:
  static std::string layer(int k, int j) { return "conv" + std::to_string(k) + "." + std::to_string(j); }

  GeneratorConfig cfg_;
  std::vector<ConvBlock<Scalar>> encoder_;
  std::vector<ConvBlock<Scalar>> skips_;
  std::vector<ConvBlock<Scalar>> decoder_;
};

/// Patch discriminator: stride-2 blocks (no normalization in the first)
/// doubling the channel count, then a 1-channel 3x3 score head.
template <typename Scalar>
class Discriminator {
 public:
  Discriminator() = default;

  Discriminator(const DiscriminatorConfig& cfg, Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    Index in_ch = 1;
    for (int i = 0; i < cfg_.layers; ++i) {
      const Index out_ch = cfg_.base_channels << i;
      blocks_.push_back(ConvBlock<Scalar>::create("block" + std::to_string(i + 1), in_ch, out_ch, 2, true,
                                                  i > 0, rng));
      in_ch = out_ch;
    }
    head_ = ConvBlock<Scalar>::create("head", in_ch, 1, 1, false, false, rng);
  }

  const DiscriminatorConfig& config() const { return cfg_; }

  Tensor<Scalar> forward(Graph<Scalar>& g, const Tensor<Scalar>& x) const {
    detail::require_rank4(x.shape(), "discriminator input");
    const Index total_stride = Index(1) << cfg_.layers;
    if (x.shape().height() < total_stride || x.shape().width() < total_stride)
      throw ShapeError("discriminator: input " + x.shape().str() + " smaller than total stride " +
                       std::to_string(total_stride));
    Tensor<Scalar> h = x;
    for (const auto& b : blocks_) h = b(g, h, Scalar(kNormEps));
    return head_(g, h, Scalar(kNormEps));
  }

  Tensor<Scalar> operator()(Graph<Scalar>& g, const Tensor<Scalar>& x) const { return forward(g, x); }

  std::vector<NamedParameter<Scalar>> named_parameters() const {
    std::vector<NamedParameter<Scalar>> out;
    for (const auto& b : blocks_) b.append_parameters(out);
    head_.append_parameters(out);
    return out;
  }

  std::vector<Tensor<Scalar>> parameters() const {
    std::vector<Tensor<Scalar>> out;
    for (auto& p : named_parameters()) out.push_back(p.tensor);
    return out;
  }

 private:
  DiscriminatorConfig cfg_;
  std::vector<ConvBlock<Scalar>> blocks_;
  ConvBlock<Scalar> head_;
};

/// Wraps a model (anything with forward(graph, x)) as a callable. The model
/// must outlive the returned function.
template <typename Model>
auto translator(const Model& model) {
  return [&model](auto& graph, const auto& x) { return model.forward(graph, x); };
}

template <typename Scalar>
void set_requires_grad(const std::vector<Tensor<Scalar>>& params, bool on) {
  for (const auto& p : params) p.set_requires_grad(on);
}

template <typename Scalar>
void zero_grad(const std::vector<Tensor<Scalar>>& params) {
  for (const auto& p : params) p.zero_grad();
}

}  // namespace tricycle
