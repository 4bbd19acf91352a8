#include "tricycle/depth_image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "tricycle/errors.hpp"

namespace tricycle {

ValidMask valid_mask(const DepthImage& z) { return (z != 0).cast<std::uint8_t>(); }

std::string encode_pgm(const DepthImage& z) {
  std::string out = "P5\n" + std::to_string(z.cols()) + " " + std::to_string(z.rows()) + "\n65535\n";
  const std::size_t header = out.size();
  out.resize(header + static_cast<std::size_t>(2 * z.size()));
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const std::uint16_t v = z.data()[i];
    out[header + 2 * i] = static_cast<char>(v >> 8);
    out[header + 2 * i + 1] = static_cast<char>(v & 0xFF);
  }
  return out;
}

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string next_token(const std::string& bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    const unsigned char ch = static_cast<unsigned char>(bytes[pos]);
    if (ch == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(ch)) {
      ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
  return bytes.substr(start, pos - start);
}

long parse_positive(const std::string& token, const char* what) {
  if (token.empty() || !std::all_of(token.begin(), token.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
    throw FormatError(std::string("PGM: malformed ") + what);
  if (token.size() > 9) throw FormatError(std::string("PGM: ") + what + " out of range");
  const long v = std::stol(token);
  if (v <= 0) throw FormatError(std::string("PGM: ") + what + " must be positive");
  return v;
}

}  // namespace

DepthImage decode_pgm(const std::string& bytes) {
  std::size_t pos = 0;
  if (next_token(bytes, pos) != "P5") throw FormatError("PGM: expected binary P5 magic");
  const long width = parse_positive(next_token(bytes, pos), "width");
  const long height = parse_positive(next_token(bytes, pos), "height");
  const long maxval = parse_positive(next_token(bytes, pos), "maxval");
  if (maxval != 65535) throw FormatError("PGM: maxval must be 65535, got " + std::to_string(maxval));
  // Exactly one whitespace byte separates the header from the payload.
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
    throw FormatError("PGM: truncated header");
  ++pos;
  const std::size_t need = static_cast<std::size_t>(2 * width * height);
  if (bytes.size() - pos < need) throw FormatError("PGM: truncated payload");
  DepthImage z(height, width);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
  for (Eigen::Index i = 0; i < z.size(); ++i)
    z.data()[i] = static_cast<std::uint16_t>((p[2 * i] << 8) | p[2 * i + 1]);
  return z;
}

DepthImage load_depth(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_pgm(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_depth(const DepthImage& z, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  const std::string bytes = encode_pgm(z);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

namespace {

struct RampStop {
  double t;
  double r, g, b;
};

// Piecewise-linear "jet" ramp. The first stop is not black, so holes stay
// distinguishable.
constexpr RampStop kRamp[] = {
    {0.000, 0, 0, 143},   {0.125, 0, 0, 255},   {0.375, 0, 255, 255},
    {0.625, 255, 255, 0}, {0.875, 255, 0, 0},   {1.000, 128, 0, 0},
};

}  // namespace

int ramp_index(std::uint16_t z, double z_max) {
  const double t = std::clamp(static_cast<double>(z) / z_max, 0.0, 1.0);
  return static_cast<int>(std::lround(t * 255.0));
}

std::array<std::uint8_t, 3> ramp_color(int index) {
  const double t = std::clamp(index, 0, 255) / 255.0;
  std::size_t seg = 0;
  while (seg + 2 < std::size(kRamp) && t > kRamp[seg + 1].t) ++seg;
  const RampStop& a = kRamp[seg];
  const RampStop& b = kRamp[seg + 1];
  const double u = (t - a.t) / (b.t - a.t);
  auto lerp = [u](double x, double y) { return static_cast<std::uint8_t>(std::lround(x + u * (y - x))); };
  return {lerp(a.r, b.r), lerp(a.g, b.g), lerp(a.b, b.b)};
}

ColorImage colorize(const DepthImage& z, double z_max) {
  if (!(z_max > 0)) throw std::invalid_argument("colorize: z_max must be positive");
  ColorImage img;
  img.width = z.cols();
  img.height = z.rows();
  img.rgb.resize(static_cast<std::size_t>(3 * z.size()));
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const std::uint16_t v = z.data()[i];
    const auto c = v == 0 ? kHoleColor : ramp_color(ramp_index(v, z_max));
    std::copy(c.begin(), c.end(), img.rgb.begin() + 3 * i);
  }
  return img;
}

void save_ppm(const ColorImage& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << "P6\n" << image.width << " " << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.rgb.data()), static_cast<std::streamsize>(image.rgb.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace tricycle
