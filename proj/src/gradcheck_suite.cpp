#include <memory>

#include "tricycle/gradcheck.hpp"
#include "tricycle/losses.hpp"
#include "tricycle/models.hpp"
#include "tricycle/ops.hpp"
#include "tricycle/random.hpp"

namespace tricycle {
namespace {

using T = Tensor<double>;

T random_tensor(Shape shape, Rng& rng, bool requires_grad, double lo = -1.0, double hi = 1.0) {
  ArrayX<double> v(shape.numel());
  for (Index i = 0; i < v.size(); ++i) v[i] = rng.uniform(lo, hi);
  return T::make(std::move(shape), std::move(v), requires_grad);
}

// Depth-like input in (0.1, 0.8) with a few zero (invalid) pixels.
T depth_tensor(Index size, Rng& rng) {
  T z = random_tensor(nchw(1, 1, size, size), rng, false, 0.1, 0.8);
  for (Index i = 0; i < z.numel(); ++i)
    if (rng.bernoulli(0.15)) z.mutable_value()[i] = 0.0;
  return z;
}

// Reduces a tensor output to a scalar with a smooth, non-degenerate probe.
T probe(Graph<double>& g, const T& y) { return mean_squared_to(g, y, 0.3); }

// Tiny translators shared by the loss-term cases.
struct TinyNets {
  Generator<double> low_to_high, high_to_low;
  Discriminator<double> disc_high, disc_low;
  T z_low, z_high;

  explicit TinyNets(Rng& rng) {
    GeneratorConfig gc;
    gc.levels = 2;
    gc.base_channels = 2;
    gc.input_size = 8;
    DiscriminatorConfig dc;
    dc.layers = 2;
    dc.base_channels = 2;
    low_to_high = Generator<double>(gc, rng);
    high_to_low = Generator<double>(gc, rng);
    disc_high = Discriminator<double>(dc, rng);
    disc_low = Discriminator<double>(dc, rng);
    // Larger init than the training default so every layer has a visible effect.
    for (auto* params : {&low_to_high, &high_to_low})
      for (const auto& p : params->named_parameters())
        if (p.name.ends_with(".weight"))
          for (Index i = 0; i < p.tensor.numel(); ++i) p.tensor.mutable_value()[i] = rng.normal(0.0, 0.4);
    for (auto* params : {&disc_high, &disc_low})
      for (const auto& p : params->named_parameters())
        if (p.name.ends_with(".weight"))
          for (Index i = 0; i < p.tensor.numel(); ++i) p.tensor.mutable_value()[i] = rng.normal(0.0, 0.4);
    z_low = depth_tensor(8, rng);
    z_high = depth_tensor(8, rng);
  }

  std::vector<T> generator_parameters() const {
    auto a = low_to_high.parameters();
    const auto b = high_to_low.parameters();
    a.insert(a.end(), b.begin(), b.end());
    return a;
  }
  std::vector<T> discriminator_parameters() const {
    auto a = disc_high.parameters();
    const auto b = disc_low.parameters();
    a.insert(a.end(), b.begin(), b.end());
    return a;
  }
};

}  // namespace

std::vector<GradCheckCase> builtin_gradcheck_cases(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<GradCheckCase> cases;

  {
    const T x = random_tensor(nchw(2, 2, 5, 5), rng, true);
    const T w = random_tensor(nchw(3, 2, 3, 3), rng, true);
    const T b = random_tensor(Shape{3}, rng, true);
    cases.push_back({"conv2d stride 1", {x, w, b}, [=](Graph<double>& g) { return probe(g, conv2d(g, x, w, b, 1)); }});
  }
  {
    const T x = random_tensor(nchw(1, 2, 6, 8), rng, true);
    const T w = random_tensor(nchw(2, 2, 3, 3), rng, true);
    const T b = random_tensor(Shape{2}, rng, true);
    cases.push_back({"conv2d stride 2", {x, w, b}, [=](Graph<double>& g) { return probe(g, conv2d(g, x, w, b, 2)); }});
  }
  {
    const T x = random_tensor(nchw(1, 2, 4, 4), rng, true);
    cases.push_back({"leaky_relu", {x}, [=](Graph<double>& g) { return probe(g, leaky_relu(g, x)); }});
  }
  {
    const T x = random_tensor(nchw(2, 3, 4, 3), rng, true);
    const T gain = random_tensor(Shape{3}, rng, true, 0.5, 1.5);
    const T shift = random_tensor(Shape{3}, rng, true);
    // A fixed random mixing conv: a plain squared-mean probe is almost
    // invariant under normalization.
    const T mix = random_tensor(nchw(2, 3, 3, 3), rng, false);
    const T mix_bias = random_tensor(Shape{2}, rng, false);
    cases.push_back({"instance_norm", {x, gain, shift}, [=](Graph<double>& g) {
                       return probe(g, conv2d(g, instance_norm(g, x, gain, shift, kNormEps), mix, mix_bias, 1));
                     }});
  }
  {
    const T x = random_tensor(nchw(1, 2, 3, 4), rng, true);
    cases.push_back({"upsample_nn", {x}, [=](Graph<double>& g) { return probe(g, upsample_nn(g, x)); }});
  }
  {
    const T a = random_tensor(nchw(2, 1, 3, 3), rng, true);
    const T b = random_tensor(nchw(2, 2, 3, 3), rng, true);
    cases.push_back({"concat_channels", {a, b}, [=](Graph<double>& g) {
                       return probe(g, scale(g, concat_channels(g, a, b), 1.7));
                     }});
  }
  {
    const T a = random_tensor(nchw(1, 1, 4, 4), rng, true);
    const T b = random_tensor(nchw(1, 1, 4, 4), rng, true);
    ArrayX<double> m(16);
    for (Index i = 0; i < 16; ++i) m[i] = (i % 3 == 0) ? 0.0 : 1.0;
    const T mask = T::constant(nchw(1, 1, 4, 4), m);
    cases.push_back({"l1_masked", {a, b}, [=](Graph<double>& g) { return l1_masked(g, a, b, mask); }});
  }
  {
    const T x = random_tensor(nchw(1, 2, 3, 3), rng, true);
    cases.push_back({"mean_squared_to", {x}, [=](Graph<double>& g) { return mean_squared_to(g, x, 1.0); }});
  }
  {
    const T x = random_tensor(Shape{5}, rng, true);
    cases.push_back({"scale and sum", {x}, [=](Graph<double>& g) {
                       return mean_squared_to(g, sum(g, scale(g, x, -0.6)), 0.5);
                     }});
  }
  {
    const T a = random_tensor(Shape{1}, rng, true);
    const T b = random_tensor(Shape{1}, rng, true);
    cases.push_back({"weighted_sum", {a, b}, [=](Graph<double>& g) {
                       const std::array<T, 2> terms{mean_squared_to(g, a, 0.0), mean_squared_to(g, b, 2.0)};
                       const std::array<double, 2> w{0.7, 3.0};
                       return weighted_sum<double>(g, terms, w);
                     }});
  }

  // Loss terms on a tiny generator/discriminator set.
  auto nets = std::make_shared<TinyNets>(rng);
  const Translator<double> lh = translator(nets->low_to_high);
  const Translator<double> hl = translator(nets->high_to_low);
  const Translator<double> dh = translator(nets->disc_high);
  const Translator<double> dl = translator(nets->disc_low);
  const T zl = nets->z_low, zh = nets->z_high;
  const T ml = valid_mask_of(zl), mh = valid_mask_of(zh);
  const auto gen = nets->generator_parameters();
  auto with_inputs = [](std::vector<T> params, const T& z) {
    // The input image is checked too, as a stand-in for upstream layers.
    T x = T::parameter(z.shape(), z.value());
    params.push_back(x);
    return std::pair{params, x};
  };

  {
    auto params = nets->low_to_high.parameters();
    auto dparams = nets->disc_high.parameters();
    params.insert(params.end(), dparams.begin(), dparams.end());
    cases.push_back({"adv_h", params, [=](Graph<double>& g) {
                       return generator_adversarial_loss(g, dh, lh(g, zl));
                     }});
  }
  {
    auto params = nets->high_to_low.parameters();
    auto dparams = nets->disc_low.parameters();
    params.insert(params.end(), dparams.begin(), dparams.end());
    cases.push_back({"adv_l", params, [=](Graph<double>& g) {
                       return generator_adversarial_loss(g, dl, hl(g, zh));
                     }});
  }
  {
    const auto fake = T::constant(zh.shape(), zh.value() * 0.9 + 0.05);
    cases.push_back({"discriminator", nets->disc_high.parameters(), [=](Graph<double>& g) {
                       return discriminator_loss(g, dh, zh, fake);
                     }});
  }
  cases.push_back({"cycle_h", gen, [=](Graph<double>& g) { return cycle_h(g, lh, hl, zh, mh); }});
  cases.push_back({"cycle_l", gen, [=](Graph<double>& g) { return cycle_l(g, hl, lh, zl); }});
  {
    auto [params, x] = with_inputs(nets->low_to_high.parameters(), zh);
    cases.push_back({"identity_h", params, [=](Graph<double>& g) { return identity_h(g, lh, x, mh); }});
  }
  cases.push_back({"identity_l", nets->high_to_low.parameters(), [=](Graph<double>& g) { return identity_l(g, hl, zl); }});
  cases.push_back({"depth_preserve", nets->low_to_high.parameters(), [=](Graph<double>& g) {
                     return depth_preserve(g, lh, zl, ml);
                   }});
  cases.push_back({"tri_cycle", gen, [=](Graph<double>& g) { return tri_cycle(g, lh, hl, zl); }});
  cases.push_back({"total", gen, [=](Graph<double>& g) {
                     const auto terms = generator_terms(g, lh, hl, dh, dl, zl, zh);
                     return total_generator_loss(g, terms, LossWeights{}).first;
                   }});
  // Keep the tiny networks alive as long as the cases.
  for (auto& c : cases) c.objective = [nets, f = std::move(c.objective)](Graph<double>& g) { return f(g); };
  return cases;
}

}  // namespace tricycle
