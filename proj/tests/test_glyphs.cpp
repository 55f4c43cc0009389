#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "simgen/glyphs.hpp"

using namespace simgen;
using namespace simgen::glyphs;

namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::Io;
}

PageLayout print_layout() {
  PageLayout l;
  l.page_w = 256;
  l.page_h = 200;
  l.margin = 16.0;
  l.line_height = 14.0;
  l.word_gap = 0.6;
  return l;
}

}  // namespace

TEST_CASE("glyph sets: empty, em-box bound, stroke counts and determinism") {
  Rng rng(1);
  CHECK(make_glyph_set(0, GlyphStyle::Brush, rng).empty());
  for (auto style : {GlyphStyle::Brush, GlyphStyle::Print}) {
    Rng a(9);
    const auto set = make_glyph_set(64, style, a);
    REQUIRE(set.size() == 64);
    for (const auto& g : set) {
      REQUIRE(!g.strokes.empty());
      REQUIRE(g.strokes.size() <= 6);
      REQUIRE(g.weight > 0.0);
      for (const auto& s : g.strokes)
        for (const auto& p : s) {
          REQUIRE((p.x >= 0.0 && p.x <= 1.0));
          REQUIRE((p.y >= 0.0 && p.y <= 1.0));
        }
    }
    Rng b(9);
    CHECK(make_glyph_set(64, style, b) == set);
  }
}

TEST_CASE("glyph sets: brush has 2-4 curves of varying weight, print is axis-snapped and uniform") {
  Rng rng(4);
  const auto brush = make_glyph_set(40, GlyphStyle::Brush, rng);
  double wmin = 1.0, wmax = 0.0;
  for (const auto& g : brush) {
    CHECK((g.strokes.size() >= 2 && g.strokes.size() <= 4));
    wmin = std::min(wmin, g.weight);
    wmax = std::max(wmax, g.weight);
  }
  CHECK(wmax > wmin);
  const auto print = make_glyph_set(40, GlyphStyle::Print, rng);
  for (const auto& g : print) {
    CHECK(g.weight == print.front().weight);
    for (const auto& s : g.strokes) {
      const bool horizontal = s[0].y == s[3].y;
      const bool vertical = s[0].x == s[3].x;
      CHECK((horizontal || vertical));
    }
  }
}

TEST_CASE("markov: single state, zero length, bad models") {
  Rng rng(2);
  const MarkovModel one{{1.0}, {{1.0}}};
  const auto seq = markov_sample(one, 50, rng);
  CHECK(seq == std::vector<std::size_t>(50, 0));
  CHECK(markov_sample(one, 0, rng).empty());

  CHECK(code_of([&] { markov_sample({{0.5, 0.5}, {{0.9, 0.2}, {0.5, 0.5}}}, 5, rng); }) == Errc::BadModel);
  CHECK(code_of([&] { markov_sample({{0.5, 0.4}, {{0.9, 0.1}, {0.5, 0.5}}}, 5, rng); }) == Errc::BadModel);
  CHECK(code_of([&] { markov_sample({{1.0, 0.0}, {{1.2, -0.2}, {0.5, 0.5}}}, 5, rng); }) == Errc::BadModel);
  CHECK(code_of([&] { markov_sample({{1.0}, {{0.5, 0.5}}}, 5, rng); }) == Errc::BadModel);
  CHECK(code_of([&] { markov_sample({{}, {}}, 5, rng); }) == Errc::BadModel);
}

TEST_CASE("markov: empirical transitions match the matrix") {
  const MarkovModel m{{0.5, 0.5}, {{0.9, 0.1}, {0.5, 0.5}}};
  Rng rng(77);
  const auto seq = markov_sample(m, 100000, rng);
  double counts[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t i = 1; i < seq.size(); ++i) counts[seq[i - 1]][seq[i]] += 1;
  for (int a = 0; a < 2; ++a) {
    const double row = counts[a][0] + counts[a][1];
    for (int b = 0; b < 2; ++b) CHECK(std::abs(counts[a][b] / row - m.trans[a][b]) <= 0.01);
  }
}

TEST_CASE("markov: random models validate and sample within range") {
  Rng rng(5);
  for (std::size_t s : {1u, 2u, 24u}) {
    const auto m = random_markov_model(s, rng);
    validate(m);
    for (auto v : markov_sample(m, 1000, rng)) REQUIRE(v < s);
  }
}

TEST_CASE("word lengths: range and geometric mean") {
  Rng rng(6);
  const auto lens = sample_word_lengths(100000, 0.35, 12, rng);
  double mean = 0.0;
  for (int n : lens) {
    REQUIRE((n >= 1 && n <= 12));
    mean += n;
  }
  mean /= static_cast<double>(lens.size());
  // Truncated geometric: E = sum k p q^(k-1) / (1 - q^12).
  double num = 0.0;
  for (int k = 1; k <= 12; ++k) num += k * 0.35 * std::pow(0.65, k - 1);
  CHECK(mean == doctest::Approx(num / (1.0 - std::pow(0.65, 12))).epsilon(0.01));
}

TEST_CASE("layout: print baselines, margins, ordering") {
  const auto l = print_layout();
  Rng rng(3);
  const auto words = sample_word_lengths(400, 0.35, 8, rng);
  const double em = 9.0;
  const auto pl = layout_page(words, em, l, rng);
  REQUIRE(!pl.empty());
  for (std::size_t i = 0; i < pl.size(); ++i) {
    const auto& p = pl[i];
    const double k = (p.y - l.margin) / l.line_height;
    REQUIRE(k == std::round(k));
    REQUIRE(p.rotation == 0.0);
    REQUIRE(p.x >= l.margin);
    REQUIRE(p.y >= l.margin);
    REQUIRE(p.x + em <= static_cast<double>(l.page_w) - l.margin + 1e-9);
    REQUIRE(p.y + em <= static_cast<double>(l.page_h) - l.margin + 1e-9);
    REQUIRE(p.slot == i);
    if (i > 0) {
      const auto& q = pl[i - 1];
      REQUIRE((p.y > q.y || (p.y == q.y && p.x > q.x)));
    }
  }
  std::size_t total = 0;
  for (int n : words) total += static_cast<std::size_t>(n);
  CHECK(pl.size() < total);
}

TEST_CASE("layout: whole words wrap") {
  auto l = print_layout();
  l.page_w = 100;
  l.margin = 10.0;
  Rng rng(1);
  // Writable width 80 holds 8 glyphs of em 10; words of 5 never share a line.
  const auto pl = layout_page({5, 5, 5}, 10.0, l, rng);
  REQUIRE(pl.size() == 15);
  for (int w = 0; w < 3; ++w)
    for (int g = 0; g < 5; ++g) {
      CHECK(pl[static_cast<std::size_t>(w * 5 + g)].y == l.margin + w * l.line_height);
      CHECK(pl[static_cast<std::size_t>(w * 5 + g)].x == l.margin + g * 10.0);
    }
}

TEST_CASE("layout: oversize glyph and unwrappable word") {
  auto l = print_layout();
  Rng rng(1);
  CHECK(code_of([&] { layout_page({3}, 300.0, l, rng); }) == Errc::GlyphTooLarge);
  const auto err = code_of([&] { layout_page({2, 200}, 9.0, l, rng); });
  CHECK((err == Errc::WordTooLong || err == Errc::GlyphTooLarge));
  l.margin = 200.0;
  CHECK_THROWS_AS(validate(l), Error);
}

TEST_CASE("layout: print mode draws nothing from the rng, brush mode jitters") {
  const auto l = print_layout();
  Rng a(10);
  const auto before = a.state();
  layout_page({3, 4, 5}, 9.0, l, a);
  CHECK(a.state() == before);

  auto brush = l;
  brush.baseline_jitter = 2.0;
  brush.slant_jitter = 0.2;
  Rng b(10);
  const auto pl = layout_page({3, 4, 5}, 9.0, brush, b);
  CHECK(b.state() != before);
  bool rotated = false;
  for (const auto& p : pl) rotated = rotated || p.rotation != 0.0;
  CHECK(rotated);
}

TEST_CASE("assign_glyphs wraps the sequence") {
  std::vector<Placement> pl(5);
  for (std::size_t i = 0; i < 5; ++i) pl[i].slot = i;
  assign_glyphs(pl, {7, 8});
  CHECK(pl[0].glyph == 7);
  CHECK(pl[3].glyph == 8);
  CHECK(pl[4].glyph == 7);
}

TEST_CASE("render_page: blank paper, texture touches only the background, determinism") {
  const auto l = print_layout();
  CHECK(render_page({}, {}, {0, 0, 0}, 9.0, l, 0.0, 1) == RasterImage(l.page_w, l.page_h, kPaper));

  Rng rng(12);
  const auto glyphs = make_glyph_set(12, GlyphStyle::Print, rng);
  auto pl = layout_page(sample_word_lengths(60, 0.35, 8, rng), 9.0, l, rng);
  assign_glyphs(pl, markov_sample(random_markov_model(12, rng), pl.size(), rng));
  const Rgb ink{20, 30, 90};
  const auto plain = render_page(pl, glyphs, ink, 9.0, l, 0.0, 4);
  const auto textured = render_page(pl, glyphs, ink, 9.0, l, 0.5, 4);
  const auto mask = ink_mask(pl, glyphs, 9.0, l);
  std::size_t inked = 0;
  bool background_differs = false;
  for (std::size_t y = 0; y < l.page_h; ++y)
    for (std::size_t x = 0; x < l.page_w; ++x) {
      const bool a = plain.get(x, y) == ink;
      const bool b = textured.get(x, y) == ink;
      REQUIRE(a == b);
      REQUIRE(a == (mask.at(x, y) != 0));
      inked += a;
      if (!a && plain.get(x, y) != textured.get(x, y)) background_differs = true;
    }
  CHECK(inked > 100);
  CHECK(background_differs);
  CHECK(render_page(pl, glyphs, ink, 9.0, l, 0.5, 4) == textured);
}
