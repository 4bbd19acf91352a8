#pragma once

#include <array>
#include <functional>
#include <stdexcept>
#include <string_view>
#include <utility>

#include "tricycle/ops.hpp"
#include "tricycle/tensor.hpp"

namespace tricycle {

/// Index of each term of the generator objective.
enum Term : int {
  kAdversarialH = 0,  // L_H(G_LH)
  kAdversarialL,      // L_L(G_HL)
  kCycleH,            // |M_H o (G_LH(G_HL(Z_H)) - Z_H)|
  kCycleL,            // |G_HL(G_LH(Z_L)) - Z_L|
  kIdentityH,         // |M_H o (G_LH(Z_H) - Z_H)|
  kIdentityL,         // |G_HL(Z_L) - Z_L|
  kDepthPreserve,     // |M_L o (G_LH(Z_L) - Z_L)|
  kTriCycle,          // |G_LH(G_HL(G_LH(Z_L))) - G_LH(Z_L)|
  kTermCount
};

inline constexpr std::array<std::string_view, kTermCount> kTermNames = {
    "adv_h", "adv_l", "cycle_h", "cycle_l", "identity_h", "identity_l", "depth_preserve", "tri_cycle"};

struct LossWeights {
  std::array<double, kTermCount> lambda = {1.0, 1.0, 10.0, 10.0, 1.0, 1.0, 0.1, 10.0};

  double& operator[](int i) { return lambda.at(static_cast<std::size_t>(i)); }
  double operator[](int i) const { return lambda.at(static_cast<std::size_t>(i)); }

  static LossWeights zeros() {
    LossWeights w;
    w.lambda.fill(0.0);
    return w;
  }

  void validate() const {
    for (double l : lambda)
      if (!(l >= 0.0)) throw std::invalid_argument("loss weights must be non-negative");
  }
};

/// Unweighted term values plus weighted totals of one training step.
struct LossReport {
  std::array<double, kTermCount> terms{};
  double total = 0.0;          // generator objective, sum lambda_i * term_i
  double discriminator_h = 0.0;
  double discriminator_l = 0.0;
};

template <typename Scalar>
using Translator = std::function<Tensor<Scalar>(Graph<Scalar>&, const Tensor<Scalar>&)>;

/// Constant {0,1} tensor marking the non-zero entries of z.
template <typename Scalar>
Tensor<Scalar> valid_mask_of(const Tensor<Scalar>& z) {
  return Tensor<Scalar>::constant(z.shape(), (z.value() != Scalar(0)).template cast<Scalar>());
}

/// Masked L1 divided by the element count.
template <typename Scalar>
Tensor<Scalar> masked_l1_term(Graph<Scalar>& g, const Tensor<Scalar>& a, const Tensor<Scalar>& b,
                              const Tensor<Scalar>& mask) {
  return scale(g, l1_masked(g, a, b, mask), Scalar(1) / static_cast<Scalar>(a.numel()));
}

template <typename Scalar>
Tensor<Scalar> l1_term(Graph<Scalar>& g, const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return scale(g, l1(g, a, b), Scalar(1) / static_cast<Scalar>(a.numel()));
}

/// Least-squares discriminator criterion: mean((D(real)-1)^2) + mean(D(fake)^2).
/// `fake` is detached, so no gradient reaches the generator that produced it.
template <typename Scalar>
Tensor<Scalar> discriminator_loss(Graph<Scalar>& g, const Translator<Scalar>& disc, const Tensor<Scalar>& real,
                                  const Tensor<Scalar>& fake) {
  if (!(real.shape() == fake.shape())) throw ShapeError("discriminator_loss: real/fake shapes differ");
  const Tensor<Scalar> on_real = mean_squared_to(g, disc(g, real), Scalar(1));
  const Tensor<Scalar> on_fake = mean_squared_to(g, disc(g, fake.detach()), Scalar(0));
  const std::array<Tensor<Scalar>, 2> parts{on_real, on_fake};
  const std::array<Scalar, 2> ones{Scalar(1), Scalar(1)};
  return weighted_sum<Scalar>(g, parts, ones);
}

/// Least-squares generator criterion: mean((D(fake)-1)^2).
template <typename Scalar>
Tensor<Scalar> generator_adversarial_loss(Graph<Scalar>& g, const Translator<Scalar>& disc,
                                          const Tensor<Scalar>& fake) {
  return mean_squared_to(g, disc(g, fake), Scalar(1));
}

/// Both sides of the adversarial game for one domain: (d_loss, g_loss).
template <typename Scalar>
std::pair<Tensor<Scalar>, Tensor<Scalar>> adversarial_terms(Graph<Scalar>& g, const Translator<Scalar>& disc,
                                                            const Tensor<Scalar>& real, const Tensor<Scalar>& fake) {
  return {discriminator_loss(g, disc, real, fake), generator_adversarial_loss(g, disc, fake)};
}

template <typename Scalar>
Tensor<Scalar> cycle_h(Graph<Scalar>& g, const Translator<Scalar>& low_to_high, const Translator<Scalar>& high_to_low,
                       const Tensor<Scalar>& z_high, const Tensor<Scalar>& mask_high) {
  return masked_l1_term(g, low_to_high(g, high_to_low(g, z_high)), z_high, mask_high);
}

template <typename Scalar>
Tensor<Scalar> cycle_l(Graph<Scalar>& g, const Translator<Scalar>& high_to_low, const Translator<Scalar>& low_to_high,
                       const Tensor<Scalar>& z_low) {
  return l1_term(g, high_to_low(g, low_to_high(g, z_low)), z_low);
}

template <typename Scalar>
Tensor<Scalar> identity_h(Graph<Scalar>& g, const Translator<Scalar>& low_to_high, const Tensor<Scalar>& z_high,
                          const Tensor<Scalar>& mask_high) {
  return masked_l1_term(g, low_to_high(g, z_high), z_high, mask_high);
}

template <typename Scalar>
Tensor<Scalar> identity_l(Graph<Scalar>& g, const Translator<Scalar>& high_to_low, const Tensor<Scalar>& z_low) {
  return l1_term(g, high_to_low(g, z_low), z_low);
}

/// Pins the absolute depth of the enhanced image to the valid input pixels.
template <typename Scalar>
Tensor<Scalar> depth_preserve(Graph<Scalar>& g, const Translator<Scalar>& low_to_high, const Tensor<Scalar>& z_low,
                              const Tensor<Scalar>& mask_low) {
  return masked_l1_term(g, low_to_high(g, z_low), z_low, mask_low);
}

/// |G_LH(G_HL(G_LH(Z_L))) - G_LH(Z_L)|: the inverse map only has to land on
/// some input that the forward map sends to the same enhanced image.
template <typename Scalar>
Tensor<Scalar> tri_cycle(Graph<Scalar>& g, const Translator<Scalar>& low_to_high,
                         const Translator<Scalar>& high_to_low, const Tensor<Scalar>& z_low) {
  const Tensor<Scalar> enhanced = low_to_high(g, z_low);
  return l1_term(g, low_to_high(g, high_to_low(g, enhanced)), enhanced);
}

/// Weighted sum of the eight terms and the matching report.
template <typename Scalar>
std::pair<Tensor<Scalar>, LossReport> total_generator_loss(Graph<Scalar>& g,
                                                           const std::array<Tensor<Scalar>, kTermCount>& terms,
                                                           const LossWeights& weights) {
  weights.validate();
  std::array<Scalar, kTermCount> w{};
  LossReport report;
  for (int i = 0; i < kTermCount; ++i) {
    w[static_cast<std::size_t>(i)] = static_cast<Scalar>(weights[i]);
    report.terms[static_cast<std::size_t>(i)] = static_cast<double>(terms[static_cast<std::size_t>(i)].item());
  }
  Tensor<Scalar> total = weighted_sum<Scalar>(g, terms, w);
  report.total = static_cast<double>(total.item());
  return {total, report};
}

/// All eight generator terms for one (Z_L, Z_H) pair, reusing the already
/// computed translations fake_high = G_LH(Z_L) and fake_low = G_HL(Z_H).
/// Adds five generator applications and two discriminator evaluations.
template <typename Scalar>
std::array<Tensor<Scalar>, kTermCount> generator_terms(Graph<Scalar>& g, const Translator<Scalar>& low_to_high,
                                                       const Translator<Scalar>& high_to_low,
                                                       const Translator<Scalar>& disc_high,
                                                       const Translator<Scalar>& disc_low,
                                                       const Tensor<Scalar>& z_low, const Tensor<Scalar>& z_high,
                                                       const Tensor<Scalar>& fake_high,
                                                       const Tensor<Scalar>& fake_low) {
  const Tensor<Scalar> mask_low = valid_mask_of(z_low);
  const Tensor<Scalar> mask_high = valid_mask_of(z_high);

  const Tensor<Scalar> back_high = low_to_high(g, fake_low);
  const Tensor<Scalar> back_low = high_to_low(g, fake_high);
  const Tensor<Scalar> same_high = low_to_high(g, z_high);
  const Tensor<Scalar> same_low = high_to_low(g, z_low);
  const Tensor<Scalar> third = low_to_high(g, back_low);

  std::array<Tensor<Scalar>, kTermCount> t;
  t[kAdversarialH] = generator_adversarial_loss(g, disc_high, fake_high);
  t[kAdversarialL] = generator_adversarial_loss(g, disc_low, fake_low);
  t[kCycleH] = masked_l1_term(g, back_high, z_high, mask_high);
  t[kCycleL] = l1_term(g, back_low, z_low);
  t[kIdentityH] = masked_l1_term(g, same_high, z_high, mask_high);
  t[kIdentityL] = l1_term(g, same_low, z_low);
  t[kDepthPreserve] = masked_l1_term(g, fake_high, z_low, mask_low);
  t[kTriCycle] = l1_term(g, third, fake_high);
  return t;
}

template <typename Scalar>
std::array<Tensor<Scalar>, kTermCount> generator_terms(Graph<Scalar>& g, const Translator<Scalar>& low_to_high,
                                                       const Translator<Scalar>& high_to_low,
                                                       const Translator<Scalar>& disc_high,
                                                       const Translator<Scalar>& disc_low,
                                                       const Tensor<Scalar>& z_low, const Tensor<Scalar>& z_high) {
  const Tensor<Scalar> fake_high = low_to_high(g, z_low);
  const Tensor<Scalar> fake_low = high_to_low(g, z_high);
  return generator_terms(g, low_to_high, high_to_low, disc_high, disc_low, z_low, z_high, fake_high, fake_low);
}

}  // namespace tricycle
