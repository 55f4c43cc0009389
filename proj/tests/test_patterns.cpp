#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <tuple>

#include "simgen/patterns.hpp"

using namespace simgen;
using namespace simgen::patterns;

namespace {

TilingSpec spec_of(TileKind kind, std::size_t tw, std::size_t th, std::size_t grout) {
  TilingSpec s;
  s.kind = kind;
  s.tile_w = tw;
  s.tile_h = th;
  s.grout = grout;
  s.palette = {{200, 100, 50}, {90, 140, 200}, {230, 230, 210}};
  s.color_jitter = 0.2;
  s.seed = 17;
  return s;
}

using Key = std::tuple<std::int64_t, std::int64_t, std::int32_t>;

struct Box {
  std::int64_t x0 = std::numeric_limits<std::int64_t>::max();
  std::int64_t y0 = std::numeric_limits<std::int64_t>::max();
  std::int64_t x1 = std::numeric_limits<std::int64_t>::min();
  std::int64_t y1 = std::numeric_limits<std::int64_t>::min();
  std::int64_t count = 0;
};

// Bounding box and pixel count of every tile's non-grout pixels in a window.
std::map<Key, Box> tile_boxes(const TilingSpec& s, std::int64_t lo, std::int64_t hi) {
  std::map<Key, Box> boxes;
  for (std::int64_t y = lo; y < hi; ++y)
    for (std::int64_t x = lo; x < hi; ++x) {
      const auto id = tile_id_at(s, x, y);
      if (id.grout) continue;
      auto& b = boxes[{id.i, id.j, id.k}];
      b.x0 = std::min(b.x0, x);
      b.y0 = std::min(b.y0, y);
      b.x1 = std::max(b.x1, x);
      b.y1 = std::max(b.y1, y);
      ++b.count;
    }
  return boxes;
}

double dist_to_bisector(double px, double py, double ax, double ay, double bx, double by) {
  const double mx = 0.5 * (ax + bx);
  const double my = 0.5 * (ay + by);
  const double nx = bx - ax;
  const double ny = by - ay;
  return std::abs((px - mx) * nx + (py - my) * ny) / std::hypot(nx, ny);
}

}  // namespace

TEST_CASE("square tiling without grout is floor division") {
  const auto s = spec_of(TileKind::Square, 7, 5, 0);
  const auto t = tile_pattern(s, 50, 40);
  for (std::size_t y = 0; y < 40; ++y)
    for (std::size_t x = 0; x < 50; ++x) {
      const auto id = t.ids.at(x, y);
      REQUIRE(id.i == static_cast<std::int64_t>(x / 7));
      REQUIRE(id.j == static_cast<std::int64_t>(y / 5));
      REQUIRE_FALSE(id.grout);
    }
}

TEST_CASE("brick rows shift by half the pitch") {
  const auto s = spec_of(TileKind::Brick, 24, 12, 2);
  const std::int64_t py = 14;
  const std::int64_t off = (24 + 2) / 2;
  for (std::int64_t j = -4; j < 4; j += 2)
    for (std::int64_t y = j * py; y < (j + 1) * py; ++y)
      for (std::int64_t x = -60; x < 60; ++x) {
        const auto lower = tile_id_at(s, x, y + py);
        const auto upper = tile_id_at(s, x + off, y);
        REQUIRE(lower.grout == upper.grout);
        REQUIRE(lower.i == upper.i);
        REQUIRE(lower.j == upper.j + 1);
      }
}

TEST_CASE("tile id maps are periodic under their lattice shifts") {
  for (auto kind : {TileKind::Square, TileKind::Brick, TileKind::Herringbone, TileKind::Hex})
    for (auto [tw, th, g] : {std::tuple<std::size_t, std::size_t, std::size_t>{9, 6, 2}, {16, 8, 0}, {11, 11, 3}}) {
      const auto s = spec_of(kind, tw, th, g);
      for (const auto& shift : lattice_period(s))
        for (std::int64_t y = -40; y < 40; ++y)
          for (std::int64_t x = -40; x < 40; ++x) {
            const auto a = tile_id_at(s, x, y);
            const auto b = tile_id_at(s, x + shift.dx, y + shift.dy);
            REQUIRE(b.grout == a.grout);
            REQUIRE(b.k == a.k);
            REQUIRE(b.i == a.i + shift.di);
            REQUIRE(b.j == a.j + shift.dj);
          }
    }
}

TEST_CASE("tile_pattern ids agree with the closed form and colors follow ids") {
  for (auto kind : {TileKind::Square, TileKind::Brick, TileKind::Herringbone, TileKind::Hex}) {
    const auto s = spec_of(kind, 12, 8, 2);
    const auto t = tile_pattern(s, 80, 60);
    std::map<Key, Rgb> color;
    for (std::size_t y = 0; y < 60; ++y)
      for (std::size_t x = 0; x < 80; ++x) {
        const auto id = t.ids.at(x, y);
        REQUIRE(id == tile_id_at(s, static_cast<std::int64_t>(x), static_cast<std::int64_t>(y)));
        if (id.grout) {
          REQUIRE(t.image.get(x, y) == kGrout);
          continue;
        }
        const auto [it, fresh] = color.emplace(Key{id.i, id.j, id.k}, t.image.get(x, y));
        if (!fresh) REQUIRE(it->second == t.image.get(x, y));
      }
    CHECK(tile_pattern(s, 80, 60).image == t.image);
  }
}

TEST_CASE("square, brick and herringbone tiles are solid rectangles of the right size") {
  for (auto kind : {TileKind::Square, TileKind::Brick, TileKind::Herringbone}) {
    const auto s = spec_of(kind, 10, 6, 2);
    const auto boxes = tile_boxes(s, -80, 80);
    std::size_t interior = 0;
    for (const auto& [key, b] : boxes) {
      if (b.x0 == -80 || b.y0 == -80 || b.x1 == 79 || b.y1 == 79) continue;
      ++interior;
      const auto bw = b.x1 - b.x0 + 1;
      const auto bh = b.y1 - b.y0 + 1;
      REQUIRE(b.count == bw * bh);
      if (kind == TileKind::Herringbone) {
        // Dominoes of two unit squares of side tile_h + grout, grout trimmed off.
        const bool flat = bw == 2 * 6 + 2 && bh == 6;
        const bool tall = bw == 6 && bh == 2 * 6 + 2;
        REQUIRE((flat || tall));
      } else {
        REQUIRE(bw == 10);
        REQUIRE(bh == 6);
      }
    }
    CHECK(interior > 20);
  }
}

TEST_CASE("hex cells have near-equal areas") {
  const auto s = spec_of(TileKind::Hex, 14, 14, 2);
  const auto boxes = tile_boxes(s, -100, 100);
  std::int64_t lo = std::numeric_limits<std::int64_t>::max();
  std::int64_t hi = 0;
  for (const auto& [key, b] : boxes) {
    if (b.x0 == -100 || b.y0 == -100 || b.x1 == 99 || b.y1 == 99) continue;
    lo = std::min(lo, b.count);
    hi = std::max(hi, b.count);
  }
  REQUIRE(hi > 0);
  CHECK(static_cast<double>(hi - lo) <= 0.1 * static_cast<double>(hi));
}

TEST_CASE("tiling spec validation") {
  auto s = spec_of(TileKind::Square, 0, 4, 1);
  CHECK_THROWS_AS(validate(s), Error);
  s = spec_of(TileKind::Square, 4, 4, 1);
  s.palette.clear();
  CHECK_THROWS_AS(validate(s), Error);
  s = spec_of(TileKind::Square, 4, 4, 1);
  s.color_jitter = 1.5;
  CHECK_THROWS_AS(validate(s), Error);
}

TEST_CASE("cracks: identity at zero, bounded, darkening, deterministic") {
  const auto s = spec_of(TileKind::Brick, 20, 10, 2);
  const auto t = tile_pattern(s, 120, 90);
  Rng r0(1);
  CHECK(apply_cracks(t.image, t.ids, 0, 0.7, r0) == t.image);

  Rng a(5);
  const auto cracked = apply_cracks(t.image, t.ids, 6, 0.7, a, 40);
  Rng b(5);
  CHECK(apply_cracks(t.image, t.ids, 6, 0.7, b, 40) == cracked);
  std::size_t changed = 0;
  for (std::size_t y = 0; y < 90; ++y)
    for (std::size_t x = 0; x < 120; ++x) {
      const Rgb before = t.image.get(x, y);
      const Rgb after = cracked.get(x, y);
      if (before == after) continue;
      ++changed;
      REQUIRE_FALSE(t.ids.at(x, y).grout);
      REQUIRE(after.r == static_cast<std::uint8_t>(std::lround(before.r * 0.4)));
    }
  CHECK(changed > 0);
  CHECK(changed <= 6 * 40);
  CHECK(default_crack_length(120, 90) == 52);
}

TEST_CASE("stains: identity at zero, never brighten, black at the peak") {
  const auto t = tile_pattern(spec_of(TileKind::Square, 16, 16, 2), 96, 96);
  CHECK(apply_stains(t.image, 0.0, 3) == t.image);
  const auto half = apply_stains(t.image, 0.5, 3);
  const RasterImage white(96, 96, Rgb{255, 255, 255});
  const auto full = apply_stains(white, 1.0, 3);
  std::size_t black = 0;
  for (std::size_t y = 0; y < 96; ++y)
    for (std::size_t x = 0; x < 96; ++x) {
      const Rgb a = t.image.get(x, y);
      const Rgb b = half.get(x, y);
      REQUIRE(b.r <= a.r);
      REQUIRE(b.g <= a.g);
      REQUIRE(b.b <= a.b);
      black += full.get(x, y) == Rgb{0, 0, 0};
    }
  CHECK(black >= 1);
  CHECK_THROWS_AS(apply_stains(t.image, 1.5, 3), Error);
}

TEST_CASE("chips: identity at zero, corners only darken, deterministic") {
  const auto s = spec_of(TileKind::Square, 16, 12, 2);
  const auto t = tile_pattern(s, 128, 96);
  CHECK(apply_chips(t.image, t.ids, 0.0, 1) == t.image);
  const auto chipped = apply_chips(t.image, t.ids, 1.0, 1);
  CHECK(apply_chips(t.image, t.ids, 1.0, 1) == chipped);
  std::size_t changed = 0;
  for (std::size_t y = 0; y < 96; ++y)
    for (std::size_t x = 0; x < 128; ++x)
      if (chipped.get(x, y) != t.image.get(x, y)) {
        ++changed;
        REQUIRE(luma(chipped.get(x, y)) < luma(t.image.get(x, y)));
      }
  CHECK(changed > 0);
}

TEST_CASE("voronoi: single seed has no ridge and shading falls off along rays") {
  const auto v = voronoi_shaded({{20.0, 20.0}}, {0.0, 3.0, 24.0}, 64, 64, 1);
  for (auto m : v.ridge.values()) REQUIRE(m == 0);
  for (std::size_t x = 20; x < 63; ++x) REQUIRE(v.brightness.at(x + 1, 20) < v.brightness.at(x, 20));
  for (std::size_t k = 20; k < 63; ++k) REQUIRE(v.brightness.at(k + 1, k + 1) < v.brightness.at(k, k));
  CHECK_THROWS_AS(voronoi_shaded({}, {}, 8, 8, 1), Error);
}

TEST_CASE("voronoi: two seeds put every ridge pixel near the bisector") {
  const double ax = 13.3, ay = 20.1, bx = 47.9, by = 41.6;
  const double rw = 4.0;
  const auto v = voronoi_shaded({{ax, ay}, {bx, by}}, {0.0, rw, 24.0}, 64, 64, 2);
  std::size_t ridge = 0;
  for (std::size_t y = 0; y < 64; ++y)
    for (std::size_t x = 0; x < 64; ++x)
      if (v.ridge.at(x, y)) {
        ++ridge;
        REQUIRE(dist_to_bisector(x + 0.5, y + 0.5, ax, ay, bx, by) <= rw / 2 + 1.0);
      }
  CHECK(ridge > 64);
}

TEST_CASE("voronoi: owner matches brute-force nearest seed") {
  Rng rng(44);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<std::pair<double, double>> seeds;
    const std::size_t n = 1 + static_cast<std::size_t>(rng.below(16));
    for (std::size_t i = 0; i < n; ++i) seeds.emplace_back(rng.uniform(0, 64), rng.uniform(0, 64));
    const auto v = voronoi_shaded(seeds, {0.0, 2.5, 24.0}, 64, 64, 3);
    for (std::size_t y = 0; y < 64; ++y)
      for (std::size_t x = 0; x < 64; ++x) {
        std::size_t best = 0;
        double bd = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
          const double d = std::hypot(x + 0.5 - seeds[i].first, y + 0.5 - seeds[i].second);
          if (d < bd) {
            bd = d;
            best = i;
          }
        }
        REQUIRE(v.owner[y * 64 + x] == best);
      }
  }
}

TEST_CASE("voronoi: warping is deterministic and changes the cells") {
  Rng rng(1);
  const auto seeds = granule_seeds(96, 96, 30, rng);
  CHECK(seeds.size() == 30);
  const auto a = voronoi_shaded(seeds, {5.0, 2.5, 24.0}, 96, 96, 9);
  CHECK(voronoi_shaded(seeds, {5.0, 2.5, 24.0}, 96, 96, 9).image == a.image);
  CHECK(voronoi_shaded(seeds, {0.0, 2.5, 24.0}, 96, 96, 9).owner != a.owner);
}

TEST_CASE("clouds: exact coverage count, clear sky, overcast") {
  const auto m = cloud_mask(200, 200, 0.4, 5);
  CHECK(std::count(m.values().begin(), m.values().end(), std::uint8_t{1}) == 16000);
  CHECK(cloud_field(40, 30, 0.0, 0.2, 5) == RasterImage(40, 30, kSky));
  const auto overcast = cloud_field(40, 30, 1.0, 0.2, 5);
  for (std::size_t y = 0; y < 30; ++y)
    for (std::size_t x = 0; x < 40; ++x) REQUIRE(luma(overcast.get(x, y)) > luma(kSky));
  const auto partial = cloud_field(200, 200, 0.4, 0.2, 5);
  std::size_t clouded = 0;
  for (std::size_t y = 0; y < 200; ++y)
    for (std::size_t x = 0; x < 200; ++x) {
      const bool c = partial.get(x, y) != kSky;
      REQUIRE(c == (m.at(x, y) != 0));
      clouded += c;
    }
  CHECK(clouded == 16000);
}
