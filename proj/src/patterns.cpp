#include "simgen/patterns.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <tuple>

#include "simgen/noise.hpp"

namespace simgen::patterns {

namespace {

constexpr std::int64_t fdiv(std::int64_t a, std::int64_t b) noexcept {
  const std::int64_t q = a / b;
  return (a % b != 0 && ((a < 0) != (b < 0))) ? q - 1 : q;
}

constexpr std::int64_t fmod_pos(std::int64_t a, std::int64_t b) noexcept { return a - fdiv(a, b) * b; }

std::int64_t hex_row_step(const TilingSpec& s) {
  return std::max<std::int64_t>(1, (3 * static_cast<std::int64_t>(s.tile_h + s.grout) + 2) / 4);
}

std::int64_t herring_unit(const TilingSpec& s) { return static_cast<std::int64_t>(s.tile_h + s.grout); }

TileId hex_id(const TilingSpec& s, std::int64_t x, std::int64_t y) {
  const auto px = static_cast<std::int64_t>(s.tile_w + s.grout);
  const std::int64_t py = hex_row_step(s);
  const std::int64_t half = px / 2;
  // Doubled coordinates keep every centre and pixel centre integral.
  const std::int64_t X = 2 * x + 1;
  const std::int64_t Y = 2 * y + 1;
  const std::int64_t r0 = fdiv(y, py);

  struct Cand {
    std::int64_t r, i, cx, cy, d2;
  };
  Cand best{0, 0, 0, 0, std::numeric_limits<std::int64_t>::max()};
  Cand second = best;
  auto better = [](const Cand& a, const Cand& b) {
    return std::tie(a.d2, a.r, a.i) < std::tie(b.d2, b.r, b.i);
  };
  for (std::int64_t r = r0 - 2; r <= r0 + 2; ++r) {
    const std::int64_t off = (r & 1) ? half : 0;
    const std::int64_t i0 = fdiv(x - off, px);
    for (std::int64_t i = i0 - 1; i <= i0 + 1; ++i) {
      Cand c{r, i, 2 * (i * px + off) + px, 2 * r * py + py, 0};
      const std::int64_t dx = X - c.cx;
      const std::int64_t dy = Y - c.cy;
      c.d2 = dx * dx + dy * dy;
      if (better(c, best)) {
        second = best;
        best = c;
      } else if (better(c, second)) {
        second = c;
      }
    }
  }
  TileId id{best.i, best.r, 0, false};
  if (s.grout > 0) {
    const double sep = std::hypot(static_cast<double>(second.cx - best.cx), static_cast<double>(second.cy - best.cy));
    const double bisector = static_cast<double>(second.d2 - best.d2) / (2.0 * sep);
    id.grout = bisector < static_cast<double>(s.grout);
  }
  return id;
}

Rgb tile_color(const TilingSpec& s, const TileId& id) {
  const std::uint64_t h = mix64(s.seed ^ mix64(static_cast<std::uint64_t>(id.i) * 0x9E3779B97F4A7C15ULL ^
                                               static_cast<std::uint64_t>(id.j) * 0xC2B2AE3D27D4EB4FULL ^
                                               static_cast<std::uint64_t>(id.k) * 0x165667B19E3779F9ULL));
  const Rgb base = s.palette[h % s.palette.size()];
  const double u = static_cast<double>(mix64(h) >> 11) * 0x1.0p-53;
  const double f = 1.0 + s.color_jitter * 0.3 * (2.0 * u - 1.0);
  auto ch = [f](std::uint8_t c) {
    return static_cast<std::uint8_t>(std::clamp(std::floor(c * f + 0.5), 0.0, 255.0));
  };
  return {ch(base.r), ch(base.g), ch(base.b)};
}

Rgb scale(Rgb c, double f) {
  auto ch = [f](std::uint8_t v) {
    return static_cast<std::uint8_t>(std::clamp(std::floor(v * f + 0.5), 0.0, 255.0));
  };
  return {ch(c.r), ch(c.g), ch(c.b)};
}

Grid2D normalized_fbm(std::size_t w, std::size_t h, double scale_px, std::uint64_t seed) {
  Grid2D f = noise::fbm_field(w, h, std::max(scale_px, 1.0), {5, 2.0, 0.5}, seed);
  const auto [lo_it, hi_it] = std::minmax_element(f.values().begin(), f.values().end());
  const double lo = *lo_it;
  const double span = *hi_it - lo;
  for (double& v : f.values()) v = span > 0.0 ? (v - lo) / span : 0.0;
  return f;
}

double smoothstep(double e0, double e1, double x) {
  const double t = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

}  // namespace

void validate(const TilingSpec& s) {
  if (s.tile_w < 1 || s.tile_h < 1) throw Error(Errc::BadParams, "tile dimensions must be >= 1");
  if (s.palette.empty()) throw Error(Errc::BadPalette, "palette must not be empty");
  if (!(s.color_jitter >= 0.0 && s.color_jitter <= 1.0)) throw Error(Errc::BadParams, "color_jitter must be in [0,1]");
}

void validate(const ImperfectionSpec& s) {
  if (!(s.crack_persistence >= 0.0 && s.crack_persistence < 1.0))
    throw Error(Errc::BadParams, "crack_persistence must be in [0,1)");
  if (!(s.stain_strength >= 0.0 && s.stain_strength <= 1.0))
    throw Error(Errc::BadParams, "stain_strength must be in [0,1]");
  if (!(s.chip_prob >= 0.0 && s.chip_prob <= 1.0)) throw Error(Errc::BadParams, "chip_prob must be in [0,1]");
}

std::vector<LatticeShift> lattice_period(const TilingSpec& s) {
  const auto px = static_cast<std::int64_t>(s.tile_w + s.grout);
  const auto py = static_cast<std::int64_t>(s.tile_h + s.grout);
  switch (s.kind) {
    case TileKind::Square:
      return {{px, 0, 1, 0}, {0, py, 0, 1}};
    case TileKind::Brick:
      return {{px, 0, 1, 0}, {0, 2 * py, 0, 2}};
    case TileKind::Herringbone: {
      const std::int64_t u = herring_unit(s);
      return {{u, u, 1, 1}, {4 * u, 0, 4, 0}};
    }
    case TileKind::Hex:
      return {{px, 0, 1, 0}, {0, 2 * hex_row_step(s), 0, 2}};
  }
  return {};
}

TileId tile_id_at(const TilingSpec& s, std::int64_t x, std::int64_t y) {
  const auto tw = static_cast<std::int64_t>(s.tile_w);
  const auto th = static_cast<std::int64_t>(s.tile_h);
  const auto g = static_cast<std::int64_t>(s.grout);
  const std::int64_t px = tw + g;
  const std::int64_t py = th + g;
  switch (s.kind) {
    case TileKind::Square: {
      const std::int64_t i = fdiv(x, px);
      const std::int64_t j = fdiv(y, py);
      return {i, j, 0, (x - i * px) >= tw || (y - j * py) >= th};
    }
    case TileKind::Brick: {
      const std::int64_t j = fdiv(y, py);
      const std::int64_t xs = x + ((j & 1) ? px / 2 : 0);
      const std::int64_t i = fdiv(xs, px);
      return {i, j, 0, (xs - i * px) >= tw || (y - j * py) >= th};
    }
    case TileKind::Herringbone: {
      // Unit squares are classed by (a-b) mod 4: classes 0,1 form a
      // horizontal 2x1 domino, classes 2 (lower) and 3 (upper) a vertical one.
      const std::int64_t u = herring_unit(s);
      const std::int64_t a = fdiv(x, u);
      const std::int64_t b = fdiv(y, u);
      std::int64_t ai = a;
      std::int64_t bi = b;
      std::int32_t k = 0;
      switch (fmod_pos(a - b, 4)) {
        case 0: break;
        case 1: ai = a - 1; break;
        case 2: k = 1; break;
        default: bi = b + 1; k = 1; break;
      }
      const std::int64_t ox = ai * u;
      const std::int64_t oy = k == 0 ? bi * u : (bi - 1) * u;
      const std::int64_t sw = k == 0 ? 2 * u : u;
      const std::int64_t sh = k == 0 ? u : 2 * u;
      return {ai, bi, k, (x - ox) >= sw - g || (y - oy) >= sh - g};
    }
    case TileKind::Hex:
      return hex_id(s, x, y);
  }
  return {};
}

Tiling tile_pattern(const TilingSpec& s, std::size_t w, std::size_t h) {
  validate(s);
  Tiling out{RasterImage(w, h), TileMap(w, h)};
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const TileId id = tile_id_at(s, static_cast<std::int64_t>(x), static_cast<std::int64_t>(y));
      out.ids.at(x, y) = id;
      out.image.set(x, y, id.grout ? kGrout : tile_color(s, id));
    }
  return out;
}

std::size_t default_crack_length(std::size_t w, std::size_t h) noexcept { return std::max<std::size_t>(8, (w + h) / 4); }

RasterImage apply_cracks(const RasterImage& img, const TileMap& ids, std::size_t n, double persistence, Rng& rng,
                         std::size_t max_len) {
  if (!(persistence >= 0.0 && persistence < 1.0)) throw Error(Errc::BadParams, "persistence must be in [0,1)");
  if (ids.width() != img.width() || ids.height() != img.height())
    throw Error(Errc::ShapeMismatch, "tile map and image differ in size");
  RasterImage out = img;
  if (n == 0) return out;
  const std::size_t w = img.width();
  const std::size_t h = img.height();
  if (max_len == 0) max_len = default_crack_length(w, h);
  const double turn = (1.0 - persistence) * std::numbers::pi / 4.0;

  Mask hit(w, h, 0);
  for (std::size_t walk = 0; walk < n; ++walk) {
    std::size_t sx = 0;
    std::size_t sy = 0;
    bool found = false;
    for (int attempt = 0; attempt < 64 && !found; ++attempt) {
      sx = rng.below(w);
      sy = rng.below(h);
      found = !ids.at(sx, sy).grout;
    }
    if (!found) continue;
    const TileId home = ids.at(sx, sy);
    double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
    double px = static_cast<double>(sx) + 0.5;
    double py = static_cast<double>(sy) + 0.5;
    hit.at(sx, sy) = 1;
    std::size_t cx = sx;
    std::size_t cy = sy;
    for (std::size_t step = 1; step < max_len; ++step) {
      heading += rng.uniform(-1.0, 1.0) * turn;
      px += std::cos(heading);
      py += std::sin(heading);
      if (px < 0.0 || py < 0.0 || px >= static_cast<double>(w) || py >= static_cast<double>(h)) break;
      const auto nx = static_cast<std::size_t>(px);
      const auto ny = static_cast<std::size_t>(py);
      if (nx == cx && ny == cy) continue;
      if (!(ids.at(nx, ny) == home)) break;
      hit.at(nx, ny) = 1;
      cx = nx;
      cy = ny;
    }
  }
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      if (hit.at(x, y)) out.set(x, y, scale(out.get(x, y), 0.4));
  return out;
}

RasterImage apply_stains(const RasterImage& img, double strength, std::uint64_t seed) {
  if (!(strength >= 0.0 && strength <= 1.0)) throw Error(Errc::BadParams, "strength must be in [0,1]");
  RasterImage out = img;
  if (strength == 0.0) return out;
  const std::size_t w = img.width();
  const std::size_t h = img.height();
  const Grid2D f = normalized_fbm(w, h, static_cast<double>(std::max(w, h)) / 3.0, seed);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const double factor = 1.0 - strength * std::max(0.0, f.at(x, y) - 0.6) / 0.4;
      if (factor < 1.0) out.set(x, y, scale(out.get(x, y), factor));
    }
  return out;
}

RasterImage apply_chips(const RasterImage& img, const TileMap& ids, double prob, std::uint64_t seed) {
  if (!(prob >= 0.0 && prob <= 1.0)) throw Error(Errc::BadParams, "chip probability must be in [0,1]");
  if (ids.width() != img.width() || ids.height() != img.height())
    throw Error(Errc::ShapeMismatch, "tile map and image differ in size");
  RasterImage out = img;
  if (prob == 0.0) return out;

  using Key = std::tuple<std::int64_t, std::int64_t, std::int32_t>;
  struct Box {
    std::size_t x0 = std::numeric_limits<std::size_t>::max(), y0 = std::numeric_limits<std::size_t>::max();
    std::size_t x1 = 0, y1 = 0;
  };
  std::map<Key, Box> boxes;
  for (std::size_t y = 0; y < ids.height(); ++y)
    for (std::size_t x = 0; x < ids.width(); ++x) {
      const TileId& id = ids.at(x, y);
      if (id.grout) continue;
      Box& b = boxes[{id.i, id.j, id.k}];
      b.x0 = std::min(b.x0, x);
      b.y0 = std::min(b.y0, y);
      b.x1 = std::max(b.x1, x);
      b.y1 = std::max(b.y1, y);
    }

  struct Chip {
    std::size_t cx, cy;
    double leg;
  };
  std::map<Key, Chip> chips;
  for (const auto& [key, b] : boxes) {
    const auto [i, j, k] = key;
    const std::uint64_t hsh = mix64(seed ^ mix64(static_cast<std::uint64_t>(i) * 0x9E3779B97F4A7C15ULL ^
                                                 static_cast<std::uint64_t>(j) * 0xC2B2AE3D27D4EB4FULL ^
                                                 static_cast<std::uint64_t>(k)));
    if (static_cast<double>(hsh >> 11) * 0x1.0p-53 >= prob) continue;
    const std::uint64_t corner = mix64(hsh) & 3;
    const double leg = std::max(2.0, 0.3 * static_cast<double>(std::min(b.x1 - b.x0, b.y1 - b.y0) + 1));
    chips[key] = {corner & 1 ? b.x1 : b.x0, corner & 2 ? b.y1 : b.y0, leg};
  }
  for (std::size_t y = 0; y < ids.height(); ++y)
    for (std::size_t x = 0; x < ids.width(); ++x) {
      const TileId& id = ids.at(x, y);
      if (id.grout) continue;
      const auto it = chips.find({id.i, id.j, id.k});
      if (it == chips.end()) continue;
      const Chip& c = it->second;
      const double d = std::abs(static_cast<double>(x) - static_cast<double>(c.cx)) +
                       std::abs(static_cast<double>(y) - static_cast<double>(c.cy));
      if (d < c.leg) out.set(x, y, scale(out.get(x, y), 0.55));
    }
  return out;
}

VoronoiResult voronoi_shaded(const std::vector<std::pair<double, double>>& points, const VoronoiParams& p,
                             std::size_t w, std::size_t h, std::uint64_t seed) {
  if (points.empty()) throw Error(Errc::NoPoints, "voronoi needs at least one seed point");
  if (!(p.ridge_width >= 0.0) || !(p.warp_amp >= 0.0) || !(p.warp_scale > 0.0))
    throw Error(Errc::BadParams, "ridge_width and warp_amp must be >= 0, warp_scale > 0");
  const noise::NoiseTable table(seed);
  const double radius = 0.5 * std::sqrt(static_cast<double>(w * h) / static_cast<double>(points.size()));
  const Rgb lane{60, 22, 4};
  const Rgb dim{140, 52, 8};
  const Rgb bright{255, 228, 150};

  VoronoiResult out{RasterImage(w, h), Grid2D(w, h), std::vector<std::size_t>(w * h, 0), Mask(w, h, 0)};
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double qx = static_cast<double>(x) + 0.5;
      double qy = static_cast<double>(y) + 0.5;
      if (p.warp_amp > 0.0) {
        const auto [wx, wy] = noise::domain_warp(qx / p.warp_scale, qy / p.warp_scale, p.warp_amp / p.warp_scale, table);
        qx = wx * p.warp_scale;
        qy = wy * p.warp_scale;
      }
      std::size_t i1 = 0;
      std::size_t i2 = 0;
      double d1 = std::numeric_limits<double>::infinity();
      double d2 = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < points.size(); ++i) {
        const double dx = qx - points[i].first;
        const double dy = qy - points[i].second;
        const double d = dx * dx + dy * dy;
        if (d < d1) {
          d2 = d1;
          i2 = i1;
          d1 = d;
          i1 = i;
        } else if (d < d2) {
          d2 = d;
          i2 = i;
        }
      }
      const std::size_t idx = y * w + x;
      out.owner[idx] = i1;
      const double b = 1.0 / (1.0 + std::sqrt(d1) / radius);
      out.brightness[idx] = b;
      bool ridge = false;
      if (std::isfinite(d2)) {
        const double sep = std::hypot(points[i2].first - points[i1].first, points[i2].second - points[i1].second);
        if (sep > 0.0) ridge = (d2 - d1) / (2.0 * sep) < 0.5 * p.ridge_width;
      }
      out.ridge[idx] = ridge ? 1 : 0;
      out.image.set(x, y, ridge ? lane : lerp(dim, bright, b));
    }
  return out;
}

std::vector<std::pair<double, double>> granule_seeds(std::size_t w, std::size_t h, std::size_t n, Rng& rng) {
  std::vector<std::pair<double, double>> pts;
  if (n == 0) return pts;
  const auto cols = static_cast<std::size_t>(
      std::max(1.0, std::round(std::sqrt(static_cast<double>(n) * static_cast<double>(w) / static_cast<double>(h)))));
  const std::size_t rows = (n + cols - 1) / cols;
  const double cw = static_cast<double>(w) / static_cast<double>(cols);
  const double ch = static_cast<double>(h) / static_cast<double>(rows);
  pts.reserve(n);
  for (std::size_t r = 0; r < rows && pts.size() < n; ++r)
    for (std::size_t c = 0; c < cols && pts.size() < n; ++c) {
      const double jx = rng.uniform(0.1, 0.9);
      const double jy = rng.uniform(0.1, 0.9);
      pts.emplace_back((static_cast<double>(c) + jx) * cw, (static_cast<double>(r) + jy) * ch);
    }
  return pts;
}

Mask cloud_mask(std::size_t w, std::size_t h, double coverage, std::uint64_t seed) {
  if (!(coverage >= 0.0 && coverage <= 1.0)) throw Error(Errc::BadParams, "coverage must be in [0,1]");
  const Grid2D f = normalized_fbm(w, h, static_cast<double>(std::max(w, h)) / 3.0, seed);
  const std::size_t n = w * h;
  const auto above = static_cast<std::size_t>(std::floor(coverage * static_cast<double>(n) + 1e-9));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return f[a] > f[b]; });
  Mask m(w, h, 0);
  for (std::size_t k = 0; k < std::min(above, n); ++k) m[order[k]] = 1;
  return m;
}

RasterImage cloud_field(std::size_t w, std::size_t h, double coverage, double softness, std::uint64_t seed) {
  if (!(softness >= 0.0)) throw Error(Errc::BadParams, "softness must be >= 0");
  const Mask above = cloud_mask(w, h, coverage, seed);
  RasterImage img(w, h, kSky);
  if (coverage == 0.0) return img;
  const Grid2D f = normalized_fbm(w, h, static_cast<double>(std::max(w, h)) / 3.0, seed);
  double threshold = 1.0;
  for (std::size_t i = 0; i < f.size(); ++i)
    if (above[i]) threshold = std::min(threshold, f[i]);
  const Rgb shadow{196, 204, 218};
  const Rgb white{252, 252, 253};
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      if (!above.at(x, y)) continue;
      const double v = f.at(x, y);
      const double alpha = softness > 0.0 ? 0.35 + 0.65 * smoothstep(0.0, softness, v - threshold) : 1.0;
      img.set(x, y, lerp(kSky, lerp(shadow, white, v), alpha));
    }
  return img;
}

}  // namespace simgen::patterns
