#include "tricycle/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "tricycle/errors.hpp"

namespace tricycle {

void PnccConfig::validate() const {
  if (block < 2) throw std::invalid_argument("pncc: block size must be at least 2");
  if (step < 1 || step > block) throw std::invalid_argument("pncc: step must lie in [1, block]");
  if (!(constancy_eps >= 0)) throw std::invalid_argument("pncc: constancy_eps must be non-negative");
}

namespace {

// Shared tail of both NCC routes: the correlation from centred second moments
// (per-pixel variances var_p, var_q and covariance cov).
double correlation(double var_p, double var_q, double cov, double mean_p, double mean_q, double eps) {
  const bool flat_p = var_p < eps, flat_q = var_q < eps;
  if (flat_p && flat_q) return std::abs(mean_p - mean_q) < eps ? 1.0 : 0.0;
  if (flat_p || flat_q) return 0.0;
  return std::clamp(cov / std::sqrt(var_p * var_q), -1.0, 1.0);
}

}  // namespace

double ncc(const Eigen::Ref<const Eigen::ArrayXXd>& p, const Eigen::Ref<const Eigen::ArrayXXd>& q,
           double constancy_eps) {
  if (p.rows() != q.rows() || p.cols() != q.cols() || p.size() == 0)
    throw ShapeError("ncc: patch shapes differ or are empty");
  const double mp = p.mean(), mq = q.mean();
  const Eigen::ArrayXXd dp = p - mp, dq = q - mq;
  const double n = static_cast<double>(p.size());
  return correlation(dp.square().sum() / n, dq.square().sum() / n, (dp * dq).sum() / n, mp, mq, constancy_eps);
}

Eigen::Index pncc_patch_count(Eigen::Index rows, Eigen::Index cols, const PnccConfig& cfg) {
  if (rows < cfg.block || cols < cfg.block) return 0;
  return ((rows - cfg.block) / cfg.step + 1) * ((cols - cfg.block) / cfg.step + 1);
}

double pncc(const DepthImage& x, const DepthImage& y, const PnccConfig& cfg) {
  cfg.validate();
  if (x.rows() != y.rows() || x.cols() != y.cols()) throw ShapeError("pncc: image sizes differ");
  if (x.rows() < cfg.block || x.cols() < cfg.block)
    throw ShapeError("pncc: image " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
                     " smaller than block " + std::to_string(cfg.block));

  // Summed-area tables of x, y, x^2, y^2, xy. Depths are < 2^16, so squared
  // terms are < 2^32 and the tables stay exact in 64 bits for images below
  // 2^31 pixels.
  using Table = Eigen::Array<std::int64_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::Index h = x.rows(), w = x.cols();
  Table sx = Table::Zero(h + 1, w + 1), sy = sx, sxx = sx, syy = sx, sxy = sx;
  for (Eigen::Index r = 0; r < h; ++r) {
    for (Eigen::Index c = 0; c < w; ++c) {
      const std::int64_t a = x(r, c), b = y(r, c);
      sx(r + 1, c + 1) = a + sx(r, c + 1) + sx(r + 1, c) - sx(r, c);
      sy(r + 1, c + 1) = b + sy(r, c + 1) + sy(r + 1, c) - sy(r, c);
      sxx(r + 1, c + 1) = a * a + sxx(r, c + 1) + sxx(r + 1, c) - sxx(r, c);
      syy(r + 1, c + 1) = b * b + syy(r, c + 1) + syy(r + 1, c) - syy(r, c);
      sxy(r + 1, c + 1) = a * b + sxy(r, c + 1) + sxy(r + 1, c) - sxy(r, c);
    }
  }
  const Eigen::Index b = cfg.block;
  auto box = [b](const Table& t, Eigen::Index r, Eigen::Index c) {
    return t(r + b, c + b) - t(r, c + b) - t(r + b, c) + t(r, c);
  };

  const double n = static_cast<double>(b * b);
  const auto nb = static_cast<std::int64_t>(b * b);
  double total = 0.0;
  Eigen::Index count = 0;
  for (Eigen::Index r = 0; r + b <= h; r += cfg.step) {
    for (Eigen::Index c = 0; c + b <= w; c += cfg.step) {
      const std::int64_t px = box(sx, r, c), py = box(sy, r, c);
      // n^2 * (centred moments), exact in integers.
      const std::int64_t vx = nb * box(sxx, r, c) - px * px;
      const std::int64_t vy = nb * box(syy, r, c) - py * py;
      const std::int64_t cv = nb * box(sxy, r, c) - px * py;
      const double n2 = n * n;
      total += correlation(static_cast<double>(vx) / n2, static_cast<double>(vy) / n2,
                           static_cast<double>(cv) / n2, static_cast<double>(px) / n,
                           static_cast<double>(py) / n, cfg.constancy_eps);
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

double masked_mae(const DepthImage& x, const DepthImage& y) {
  if (x.rows() != y.rows() || x.cols() != y.cols()) throw ShapeError("masked_mae: image sizes differ");
  double sum = 0.0;
  Eigen::Index count = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const std::uint16_t a = x.data()[i], b = y.data()[i];
    if (a == 0 || b == 0) continue;
    sum += std::abs(static_cast<double>(a) - static_cast<double>(b));
    ++count;
  }
  if (count == 0) throw DataError("masked_mae: no pixel is valid in both images");
  return sum / static_cast<double>(count);
}

}  // namespace tricycle
