#pragma once

#include <array>
#include <cstdint>
#include <utility>

#include "simgen/core.hpp"

namespace simgen::noise {

/// Permutation table plus the fixed 8-direction gradient set.
class NoiseTable {
 public:
  explicit NoiseTable(std::uint64_t seed);

  std::uint8_t perm(std::size_t i) const noexcept { return perm_[i & 511]; }
  const std::array<std::uint8_t, 512>& permutation() const noexcept { return perm_; }

 private:
  std::array<std::uint8_t, 512> perm_{};
};

struct Gradient {
  double x;
  double y;
};

/// Axis and diagonal unit directions.
const std::array<Gradient, 8>& gradients() noexcept;

/// Classic 2-D gradient noise with quintic fade. Zero on integer lattice points.
double perlin2(double x, double y, const NoiseTable& table) noexcept;

struct FbmParams {
  int octaves = 5;
  double lacunarity = 2.0;
  double gain = 0.5;
};

void validate(const FbmParams& p);

/// Sum of `octaves` perlin2 layers; not renormalized, so |fbm| <= sum of gain^i.
double fbm(double x, double y, const FbmParams& p, const NoiseTable& table);

/// Upper bound on |fbm| for the given parameters.
double fbm_bound(const FbmParams& p) noexcept;

/// Samples fbm at (x/scale, y/scale) for every integer cell.
Grid2D fbm_field(std::size_t width, std::size_t height, double scale, const FbmParams& p, std::uint64_t seed);

inline constexpr double kWarpOffsetX = 5.2;
inline constexpr double kWarpOffsetY = 1.3;

/// (x + amp*perlin2(x+ox, y), y + amp*perlin2(x, y+oy)).
std::pair<double, double> domain_warp(double x, double y, double amp, const NoiseTable& table) noexcept;

}  // namespace simgen::noise
