#pragma once

#include <cstdint>
#include <vector>

#include "simgen/core.hpp"

namespace simgen::patterns {

enum class TileKind { Square, Brick, Herringbone, Hex };

struct TilingSpec {
  TileKind kind = TileKind::Square;
  std::size_t tile_w = 32;
  std::size_t tile_h = 32;
  std::size_t grout = 2;
  std::vector<Rgb> palette{{180, 160, 140}};
  double color_jitter = 0.1;
  std::uint64_t seed = 0;
};

void validate(const TilingSpec& s);

/// Lattice coordinates (i, j) plus an orientation/class index k.
struct TileId {
  std::int64_t i = 0;
  std::int64_t j = 0;
  std::int32_t k = 0;
  bool grout = false;
  friend bool operator==(const TileId&, const TileId&) = default;
};

/// Per-pixel tile ids. Grout pixels keep the id of the tile they border.
using TileMap = Grid<TileId>;

/// A translation of the pixel plane that maps the id map onto itself,
/// shifting ids by (di, dj).
struct LatticeShift {
  std::int64_t dx = 0;
  std::int64_t dy = 0;
  std::int64_t di = 0;
  std::int64_t dj = 0;
};

/// The two generating shifts of the tiling's period lattice.
std::vector<LatticeShift> lattice_period(const TilingSpec& s);

/// Closed-form id at an arbitrary (possibly negative) pixel.
TileId tile_id_at(const TilingSpec& s, std::int64_t x, std::int64_t y);

struct Tiling {
  RasterImage image;
  TileMap ids;
};

Tiling tile_pattern(const TilingSpec& s, std::size_t w, std::size_t h);

inline constexpr Rgb kGrout{96, 92, 88};

struct ImperfectionSpec {
  std::size_t cracks = 0;
  double crack_persistence = 0.7;
  double stain_strength = 0.0;
  double chip_prob = 0.0;
};

void validate(const ImperfectionSpec& s);

/// Default per-walk pixel budget for an image of this size.
std::size_t default_crack_length(std::size_t w, std::size_t h) noexcept;

/// `n` correlated walks, each confined to the tile it starts in and at most
/// `max_len` pixels long (0 picks the default). Visited pixels are scaled by 0.4.
RasterImage apply_cracks(const RasterImage& img, const TileMap& ids, std::size_t n, double persistence, Rng& rng,
                         std::size_t max_len = 0);

/// Multiplies by 1 - strength*max(0, f-0.6)/0.4 over a normalized fBM field f.
RasterImage apply_stains(const RasterImage& img, double strength, std::uint64_t seed);

/// Darkens a corner triangle on a `prob` fraction of tiles.
RasterImage apply_chips(const RasterImage& img, const TileMap& ids, double prob, std::uint64_t seed);

struct VoronoiParams {
  double warp_amp = 0.0;     // px
  double ridge_width = 3.0;  // px
  double warp_scale = 24.0;  // px per noise lattice cell
};

struct VoronoiResult {
  RasterImage image;
  Grid2D brightness;                // interior shading, 1 at a seed
  std::vector<std::size_t> owner;   // nearest seed per pixel, row-major
  Mask ridge;
};

/// Distances are measured from pixel centres (x+0.5, y+0.5), after warping.
/// A pixel is ridge when its distance to the bisector of its two nearest
/// seeds is below ridge_width/2.
VoronoiResult voronoi_shaded(const std::vector<std::pair<double, double>>& points, const VoronoiParams& p,
                             std::size_t w, std::size_t h, std::uint64_t seed);

/// Jittered seed layout for the granulation look.
std::vector<std::pair<double, double>> granule_seeds(std::size_t w, std::size_t h, std::size_t n, Rng& rng);

/// Exactly floor(coverage*w*h) cells set (the highest fBM samples, ties by
/// row-major order).
Mask cloud_mask(std::size_t w, std::size_t h, double coverage, std::uint64_t seed);

inline constexpr Rgb kSky{92, 146, 212};

RasterImage cloud_field(std::size_t w, std::size_t h, double coverage, double softness, std::uint64_t seed);

}  // namespace simgen::patterns
