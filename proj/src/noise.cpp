#include "simgen/noise.hpp"

#include <cmath>
#include <numeric>

namespace simgen::noise {

namespace {

constexpr double kDiag = 0.70710678118654752440;

constexpr std::array<Gradient, 8> kGradients{{
    {1.0, 0.0}, {-1.0, 0.0}, {0.0, 1.0}, {0.0, -1.0},
    {kDiag, kDiag}, {-kDiag, kDiag}, {kDiag, -kDiag}, {-kDiag, -kDiag},
}};

inline double fade(double t) noexcept { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

inline double corner(const NoiseTable& table, long xi, long yi, double dx, double dy) noexcept {
  const auto h = table.perm(table.perm(static_cast<std::size_t>(xi & 255)) + static_cast<std::size_t>(yi & 255));
  const Gradient& g = kGradients[h & 7];
  return g.x * dx + g.y * dy;
}

}  // namespace

const std::array<Gradient, 8>& gradients() noexcept { return kGradients; }

NoiseTable::NoiseTable(std::uint64_t seed) {
  std::array<std::uint8_t, 256> p{};
  std::iota(p.begin(), p.end(), std::uint8_t{0});
  Rng rng(seed);
  for (std::size_t i = 255; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i + 1));
    std::swap(p[i], p[j]);
  }
  for (std::size_t i = 0; i < 512; ++i) perm_[i] = p[i & 255];
}

double perlin2(double x, double y, const NoiseTable& table) noexcept {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const auto xi = static_cast<long>(fx);
  const auto yi = static_cast<long>(fy);
  const double dx = x - fx;
  const double dy = y - fy;

  const double n00 = corner(table, xi, yi, dx, dy);
  const double n10 = corner(table, xi + 1, yi, dx - 1.0, dy);
  const double n01 = corner(table, xi, yi + 1, dx, dy - 1.0);
  const double n11 = corner(table, xi + 1, yi + 1, dx - 1.0, dy - 1.0);

  const double u = fade(dx);
  const double v = fade(dy);
  const double nx0 = n00 + u * (n10 - n00);
  const double nx1 = n01 + u * (n11 - n01);
  return nx0 + v * (nx1 - nx0);
}

void validate(const FbmParams& p) {
  if (p.octaves < 1) throw Error(Errc::BadParams, "octaves must be >= 1");
  if (!(p.lacunarity > 1.0) || !std::isfinite(p.lacunarity))
    throw Error(Errc::BadParams, "lacunarity must be > 1");
  if (!(p.gain > 0.0 && p.gain < 1.0)) throw Error(Errc::BadParams, "gain must be in (0, 1)");
}

double fbm(double x, double y, const FbmParams& p, const NoiseTable& table) {
  validate(p);
  double sum = 0.0;
  double amp = 1.0;
  double freq = 1.0;
  for (int i = 0; i < p.octaves; ++i) {
    sum += amp * perlin2(x * freq, y * freq, table);
    amp *= p.gain;
    freq *= p.lacunarity;
  }
  return sum;
}

double fbm_bound(const FbmParams& p) noexcept {
  double sum = 0.0;
  double amp = 1.0;
  for (int i = 0; i < p.octaves; ++i) {
    sum += amp;
    amp *= p.gain;
  }
  return sum;
}

Grid2D fbm_field(std::size_t width, std::size_t height, double scale, const FbmParams& p, std::uint64_t seed) {
  validate(p);
  if (width == 0 || height == 0) throw Error(Errc::BadParams, "fbm_field dimensions must be >= 1");
  if (!(scale > 0.0) || !std::isfinite(scale)) throw Error(Errc::BadParams, "scale must be > 0");
  const NoiseTable table(seed);
  Grid2D out(width, height);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x)
      out.at(x, y) = fbm(static_cast<double>(x) / scale, static_cast<double>(y) / scale, p, table);
  return out;
}

std::pair<double, double> domain_warp(double x, double y, double amp, const NoiseTable& table) noexcept {
  if (amp == 0.0) return {x, y};
  return {x + amp * perlin2(x + kWarpOffsetX, y, table), y + amp * perlin2(x, y + kWarpOffsetY, table)};
}

}  // namespace simgen::noise
