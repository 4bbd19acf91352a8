#pragma once

#include <Eigen/Core>

#include "tricycle/depth_image.hpp"

namespace tricycle {

struct PnccConfig {
  Eigen::Index block = 16;
  Eigen::Index step = 4;
  /// Patch variances (and mean differences) below this count as constant.
  double constancy_eps = 1e-6;

  void validate() const;
};

/// Normalized cross-correlation of two equally sized patches, in [-1, 1].
///
/// Constant patches: two constant patches score 1 if their means agree
/// (within eps) and 0 otherwise; a constant patch against a non-constant one
/// scores 0.
double ncc(const Eigen::Ref<const Eigen::ArrayXXd>& p, const Eigen::Ref<const Eigen::ArrayXXd>& q,
           double constancy_eps = 1e-6);

/// Number of block x block patches on the step grid of a rows x cols image.
Eigen::Index pncc_patch_count(Eigen::Index rows, Eigen::Index cols, const PnccConfig& cfg = {});

/// Mean NCC over all fully contained patches whose corners lie on the step
/// grid. Computed on raw millimetre values (holes included) with exact
/// integer patch moments from summed-area tables.
double pncc(const DepthImage& x, const DepthImage& y, const PnccConfig& cfg = {});

/// Mean absolute difference (mm) over pixels valid in both images.
double masked_mae(const DepthImage& x, const DepthImage& y);

}  // namespace tricycle
