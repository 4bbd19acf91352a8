#include "tricycle/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "tricycle/errors.hpp"

namespace tricycle {

DepthStats depth_stats(const DepthImage& z, double far_thresh) {
  DepthStats s;
  if (z.size() == 0) return s;
  double sum = 0.0, sum_sq = 0.0;
  Eigen::Index valid = 0, far = 0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double v = z.data()[i];
    if (v > far_thresh) ++far;
    if (v == 0) continue;
    ++valid;
    sum += v;
    sum_sq += v * v;
  }
  if (valid > 0) {
    const double mean = sum / static_cast<double>(valid);
    s.valid_stddev = std::sqrt(std::max(0.0, sum_sq / static_cast<double>(valid) - mean * mean));
  }
  s.far_fraction = static_cast<double>(far) / static_cast<double>(z.size());
  return s;
}

bool accept_scene(const DepthImage& z, const FilterConfig& cfg) {
  const DepthStats s = depth_stats(z, cfg.far_thresh);
  return !(s.valid_stddev < cfg.sigma_min) && !(s.far_fraction > cfg.far_frac);
}

std::vector<std::size_t> filter_dataset(std::span<const DepthImage> images, const FilterConfig& cfg) {
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < images.size(); ++i)
    if (accept_scene(images[i], cfg)) kept.push_back(i);
  return kept;
}

DepthImage rotate90(const DepthImage& z) {
  // out(r, c) = z(c, W - 1 - r)
  DepthImage out(z.cols(), z.rows());
  for (Eigen::Index r = 0; r < out.rows(); ++r)
    for (Eigen::Index c = 0; c < out.cols(); ++c) out(r, c) = z(c, z.cols() - 1 - r);
  return out;
}

AugmentParams sample_augment(const DepthImage& z, const AugmentConfig& cfg, Rng& rng) {
  if (z.rows() < cfg.crop_size || z.cols() < cfg.crop_size)
    throw ShapeError("augment: image " + std::to_string(z.rows()) + "x" + std::to_string(z.cols()) +
                     " smaller than crop " + std::to_string(cfg.crop_size));
  AugmentParams p;
  p.crop_row = static_cast<Eigen::Index>(rng.uniform_int(static_cast<std::uint64_t>(z.rows() - cfg.crop_size + 1)));
  p.crop_col = static_cast<Eigen::Index>(rng.uniform_int(static_cast<std::uint64_t>(z.cols() - cfg.crop_size + 1)));
  p.quarter_turns = static_cast<int>(rng.uniform_int(4));
  p.flip_horizontal = rng.bernoulli(0.5);
  p.flip_vertical = rng.bernoulli(0.5);
  p.depth_shift = static_cast<int>(rng.uniform_int(-cfg.max_depth_shift, cfg.max_depth_shift));
  return p;
}

DepthImage apply_augment(const DepthImage& z, Eigen::Index crop_size, const AugmentParams& p) {
  if (z.rows() < crop_size || z.cols() < crop_size || p.crop_row < 0 || p.crop_col < 0 ||
      p.crop_row + crop_size > z.rows() || p.crop_col + crop_size > z.cols())
    throw ShapeError("augment: crop window outside image");
  DepthImage out = z.block(p.crop_row, p.crop_col, crop_size, crop_size);
  for (int k = 0; k < (p.quarter_turns % 4 + 4) % 4; ++k) out = rotate90(out);
  if (p.flip_horizontal) out = out.rowwise().reverse().eval();
  if (p.flip_vertical) out = out.colwise().reverse().eval();
  if (p.depth_shift != 0) {
    for (Eigen::Index i = 0; i < out.size(); ++i) {
      std::uint16_t& v = out.data()[i];
      if (v == 0) continue;
      v = static_cast<std::uint16_t>(std::clamp<long>(static_cast<long>(v) + p.depth_shift, 1, kMaxDepth));
    }
  }
  return out;
}

DepthImage augment(const DepthImage& z, const AugmentConfig& cfg, Rng& rng) {
  return apply_augment(z, cfg.crop_size, sample_augment(z, cfg, rng));
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

DatasetManifest DatasetManifest::load(const std::filesystem::path& file, std::optional<Domain> domain) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open manifest " + file.string());
  DatasetManifest m;
  std::optional<Domain> declared;
  const std::filesystem::path base = file.parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
  };
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      const std::string body = trim(t.substr(1));
      if (body.rfind("domain:", 0) == 0) {
        const std::string d = trim(body.substr(7));
        if (d == "L") declared = Domain::Low;
        else if (d == "H") declared = Domain::High;
        else throw FormatError("manifest " + file.string() + ": unknown domain '" + d + "'");
      }
      continue;
    }
    const auto tab = t.find('\t');
    if (tab == std::string::npos) {
      if (!m.references.empty()) throw FormatError("manifest " + file.string() + ": mixed paired/unpaired lines");
      m.paths.push_back(resolve(t));
    } else {
      if (!m.paths.empty() && m.references.size() != m.paths.size())
        throw FormatError("manifest " + file.string() + ": mixed paired/unpaired lines");
      // Paired manifests list the clean reference first.
      m.references.push_back(resolve(trim(t.substr(0, tab))));
      m.paths.push_back(resolve(trim(t.substr(tab + 1))));
    }
  }
  for (const auto* list : {&m.paths, &m.references})
    for (const auto& p : *list)
      if (!std::filesystem::exists(p)) throw DataError("manifest " + file.string() + ": missing file " + p.string());
  if (domain) m.domain = *domain;
  else if (declared) m.domain = *declared;
  else throw FormatError("manifest " + file.string() + ": no domain tag");
  return m;
}

void DatasetManifest::save(const std::filesystem::path& file) const {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw DataError("cannot write manifest " + file.string());
  const auto base = std::filesystem::absolute(file).parent_path().lexically_normal();
  auto rel = [&](const std::filesystem::path& p) {
    return std::filesystem::absolute(p).lexically_normal().lexically_relative(base).generic_string();
  };
  out << "# domain: " << (domain == Domain::Low ? "L" : "H") << "\n";
  for (std::size_t i = 0; i < paths.size(); ++i) {
    if (!references.empty()) out << rel(references[i]) << "\t";
    out << rel(paths[i]) << "\n";
  }
  if (!out) throw DataError("write failed for manifest " + file.string());
}

std::vector<DepthImage> DatasetManifest::load_images() const {
  std::vector<DepthImage> images;
  images.reserve(paths.size());
  for (const auto& p : paths) images.push_back(load_depth(p));
  return images;
}

}  // namespace tricycle
