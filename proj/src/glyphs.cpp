#include "simgen/glyphs.hpp"

#include <algorithm>
#include <cmath>

#include "simgen/noise.hpp"

namespace simgen::glyphs {

namespace {

ControlPoint clamp_em(ControlPoint p) { return {std::clamp(p.x, 0.0, 1.0), std::clamp(p.y, 0.0, 1.0)}; }

Stroke brush_stroke(Rng& rng) {
  Stroke s;
  s[0] = {rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9)};
  for (std::size_t i = 1; i < 4; ++i)
    s[i] = clamp_em({s[i - 1].x + rng.uniform(-0.4, 0.4), s[i - 1].y + rng.uniform(-0.4, 0.4)});
  return s;
}

Stroke print_stroke(Rng& rng) {
  static constexpr std::array<double, 5> kSnap{0.1, 0.3, 0.5, 0.7, 0.9};
  const bool horizontal = rng.below(2) == 0;
  const double fixed = kSnap[rng.below(kSnap.size())];
  std::size_t a = rng.below(kSnap.size());
  std::size_t b = rng.below(kSnap.size());
  if (a == b) b = (a + 2) % kSnap.size();
  const double from = kSnap[std::min(a, b)];
  const double to = kSnap[std::max(a, b)];
  Stroke s;
  for (std::size_t i = 0; i < 4; ++i) {
    const double t = from + (to - from) * static_cast<double>(i) / 3.0;
    s[i] = horizontal ? ControlPoint{t, fixed} : ControlPoint{fixed, t};
  }
  return s;
}

ControlPoint bezier(const Stroke& s, double t) {
  const double u = 1.0 - t;
  const double a = u * u * u;
  const double b = 3.0 * u * u * t;
  const double c = 3.0 * u * t * t;
  const double d = t * t * t;
  return {a * s[0].x + b * s[1].x + c * s[2].x + d * s[3].x, a * s[0].y + b * s[1].y + c * s[2].y + d * s[3].y};
}

}  // namespace

std::vector<GlyphPrototype> make_glyph_set(std::size_t n, GlyphStyle style, Rng& rng) {
  std::vector<GlyphPrototype> out;
  out.reserve(n);
  for (std::size_t g = 0; g < n; ++g) {
    GlyphPrototype glyph;
    if (style == GlyphStyle::Brush) {
      const std::size_t strokes = 2 + rng.below(3);
      for (std::size_t i = 0; i < strokes; ++i) glyph.strokes.push_back(brush_stroke(rng));
      glyph.weight = rng.uniform(0.06, 0.14);
    } else {
      const std::size_t strokes = 1 + rng.below(4);
      for (std::size_t i = 0; i < strokes; ++i) glyph.strokes.push_back(print_stroke(rng));
      glyph.weight = 0.09;
    }
    out.push_back(std::move(glyph));
  }
  return out;
}

void validate(const MarkovModel& m) {
  const std::size_t s = m.start.size();
  if (s == 0) throw Error(Errc::BadModel, "model needs at least one state");
  if (m.trans.size() != s) throw Error(Errc::BadModel, "transition matrix must be S x S");
  auto check_row = [s](const std::vector<double>& row, const char* what) {
    if (row.size() != s) throw Error(Errc::BadModel, std::string(what) + " has wrong length");
    double sum = 0.0;
    for (double p : row) {
      if (!(p >= 0.0) || !std::isfinite(p)) throw Error(Errc::BadModel, std::string(what) + " has a negative entry");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw Error(Errc::BadModel, std::string(what) + " does not sum to 1");
  };
  check_row(m.start, "start vector");
  for (const auto& row : m.trans) check_row(row, "transition row");
}

namespace {

std::size_t draw_from(const std::vector<double>& probs, Rng& rng) {
  const double u = rng.unit();
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    last_positive = i;
    acc += probs[i];
    if (u < acc) return i;
  }
  return last_positive;
}

}  // namespace

std::vector<std::size_t> markov_sample(const MarkovModel& m, std::size_t length, Rng& rng) {
  validate(m);
  std::vector<std::size_t> out;
  out.reserve(length);
  if (length == 0) return out;
  out.push_back(draw_from(m.start, rng));
  while (out.size() < length) out.push_back(draw_from(m.trans[out.back()], rng));
  return out;
}

MarkovModel random_markov_model(std::size_t states, Rng& rng) {
  if (states == 0) throw Error(Errc::BadModel, "model needs at least one state");
  MarkovModel m;
  m.start.assign(states, 1.0 / static_cast<double>(states));
  m.trans.assign(states, std::vector<double>(states, 0.0));
  for (auto& row : m.trans) {
    double total = 0.0;
    for (double& p : row) {
      const double u = rng.unit();
      p = u * u * u * u;  // skewed so each row prefers a few successors
      total += p;
    }
    if (total <= 0.0) {
      row.assign(states, 1.0 / static_cast<double>(states));
      continue;
    }
    for (double& p : row) p /= total;
  }
  return m;
}

std::vector<int> sample_word_lengths(std::size_t count, double p, int max_len, Rng& rng) {
  if (!(p > 0.0 && p <= 1.0) || max_len < 1) throw Error(Errc::BadParams, "need p in (0,1] and max_len >= 1");
  std::vector<int> out;
  out.reserve(count);
  // Inverse CDF of the geometric law conditioned on k <= max_len.
  const double q = 1.0 - p;
  const double tail = 1.0 - std::pow(q, max_len);
  for (std::size_t i = 0; i < count; ++i) {
    const double u = rng.unit();
    int len = 1;
    if (q > 0.0) len = static_cast<int>(std::ceil(std::log1p(-u * tail) / std::log(q)));
    out.push_back(std::clamp(len, 1, max_len));
  }
  return out;
}

void validate(const PageLayout& l) {
  if (!(l.line_height > 0.0)) throw Error(Errc::BadParams, "line_height must be > 0");
  if (!(l.margin >= 0.0) || !(2.0 * l.margin < static_cast<double>(l.page_w)) ||
      !(2.0 * l.margin < static_cast<double>(l.page_h)))
    throw Error(Errc::BadParams, "margins leave no writable area");
  if (!(l.word_gap >= 0.0) || !(l.baseline_jitter >= 0.0) || !(l.slant_jitter >= 0.0))
    throw Error(Errc::BadParams, "gaps and jitters must be >= 0");
}

std::vector<Placement> layout_page(const std::vector<int>& word_lengths, double glyph_em, const PageLayout& l,
                                   Rng& rng) {
  validate(l);
  if (!(glyph_em > 0.0)) throw Error(Errc::BadParams, "glyph_em must be > 0");
  const double left = l.margin;
  const double right = static_cast<double>(l.page_w) - l.margin;
  const double top = l.margin;
  const double bottom = static_cast<double>(l.page_h) - l.margin;
  if (glyph_em > right - left || glyph_em > bottom - top)
    throw Error(Errc::GlyphTooLarge, "glyph_em exceeds the writable area");
  const auto capacity = static_cast<std::size_t>(std::floor((right - left) / glyph_em));

  std::vector<Placement> out;
  std::size_t slot = 0;
  std::size_t line = 0;
  double x = left;
  auto line_y = [&](std::size_t k) { return top + static_cast<double>(k) * l.line_height; };

  for (const int len : word_lengths) {
    if (len <= 0) continue;
    const auto n = static_cast<std::size_t>(len);
    if (n > capacity)
      throw Error(Errc::WordTooLong, "a word of " + std::to_string(n) + " glyphs cannot fit on any line");
    if (x > left && x + static_cast<double>(n) * glyph_em > right) {
      ++line;
      x = left;
    }
    const double y = line_y(line);
    if (y + glyph_em > bottom) break;
    for (std::size_t g = 0; g < n; ++g) {
      Placement p;
      p.slot = slot;
      p.glyph = slot;
      p.x = x + static_cast<double>(g) * glyph_em;
      p.y = y;
      if (l.baseline_jitter > 0.0)
        p.y = std::clamp(y + rng.uniform(-l.baseline_jitter, l.baseline_jitter), top, bottom - glyph_em);
      if (l.slant_jitter > 0.0) p.rotation = rng.uniform(-l.slant_jitter, l.slant_jitter);
      out.push_back(p);
      ++slot;
    }
    x += static_cast<double>(n) * glyph_em + l.word_gap * glyph_em;
  }
  return out;
}

void assign_glyphs(std::vector<Placement>& placements, const std::vector<std::size_t>& sequence) {
  if (sequence.empty()) return;
  for (auto& p : placements) p.glyph = sequence[p.slot % sequence.size()];
}

Mask ink_mask(const std::vector<Placement>& placements, const std::vector<GlyphPrototype>& glyphs, double glyph_em,
              const PageLayout& l) {
  Mask mask(l.page_w, l.page_h, 0);
  if (glyphs.empty()) return mask;
  const auto W = static_cast<long>(l.page_w);
  const auto H = static_cast<long>(l.page_h);
  constexpr int kSamples = 32;

  for (const auto& p : placements) {
    const GlyphPrototype& glyph = glyphs[p.glyph % glyphs.size()];
    const double radius = std::max(0.5 * glyph.weight * glyph_em, 0.6);
    const double c = std::cos(p.rotation);
    const double s = std::sin(p.rotation);
    const double cx = p.x + 0.5 * glyph_em;
    const double cy = p.y + 0.5 * glyph_em;
    auto to_page = [&](ControlPoint q) {
      const double u = (q.x - 0.5) * glyph_em;
      const double v = (q.y - 0.5) * glyph_em;
      return ControlPoint{cx + c * u - s * v, cy + s * u + c * v};
    };
    for (const auto& stroke : glyph.strokes) {
      ControlPoint prev = to_page(bezier(stroke, 0.0));
      for (int i = 1; i <= kSamples; ++i) {
        const ControlPoint cur = to_page(bezier(stroke, static_cast<double>(i) / kSamples));
        const long lx = std::max(0L, static_cast<long>(std::floor(std::min(prev.x, cur.x) - radius)));
        const long hx = std::min(W - 1, static_cast<long>(std::ceil(std::max(prev.x, cur.x) + radius)));
        const long ly = std::max(0L, static_cast<long>(std::floor(std::min(prev.y, cur.y) - radius)));
        const long hy = std::min(H - 1, static_cast<long>(std::ceil(std::max(prev.y, cur.y) + radius)));
        const double dx = cur.x - prev.x;
        const double dy = cur.y - prev.y;
        const double len2 = dx * dx + dy * dy;
        for (long y = ly; y <= hy; ++y)
          for (long x = lx; x <= hx; ++x) {
            const double px = static_cast<double>(x) + 0.5;
            const double py = static_cast<double>(y) + 0.5;
            double t = len2 > 0.0 ? ((px - prev.x) * dx + (py - prev.y) * dy) / len2 : 0.0;
            t = std::clamp(t, 0.0, 1.0);
            const double ex = prev.x + t * dx - px;
            const double ey = prev.y + t * dy - py;
            if (ex * ex + ey * ey <= radius * radius) mask.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y)) = 1;
          }
        prev = cur;
      }
    }
  }
  return mask;
}

RasterImage render_page(const std::vector<Placement>& placements, const std::vector<GlyphPrototype>& glyphs,
                        Rgb ink, double glyph_em, const PageLayout& l, double texture_strength, std::uint64_t seed) {
  validate(l);
  if (!(texture_strength >= 0.0 && texture_strength <= 1.0))
    throw Error(Errc::BadParams, "texture_strength must be in [0,1]");
  const std::size_t w = l.page_w;
  const std::size_t h = l.page_h;
  RasterImage img(w, h, kPaper);

  if (texture_strength > 0.0) {
    const Grid2D tex = noise::fbm_field(w, h, 48.0, {5, 2.0, 0.5}, seed);
    const auto [lo_it, hi_it] = std::minmax_element(tex.values().begin(), tex.values().end());
    const double lo = *lo_it;
    const double span = *hi_it - lo;
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const double t = span > 0.0 ? (tex.at(x, y) - lo) / span : 0.0;
        img.set(x, y, lerp(Rgb{0, 0, 0}, kPaper, 1.0 - texture_strength * 0.35 * t));
      }
  }

  if (l.ruled) {
    const Rgb rule{168, 188, 220};
    for (double y = l.margin + glyph_em; y < static_cast<double>(h) - l.margin; y += l.line_height) {
      const auto yi = static_cast<std::size_t>(y);
      for (std::size_t x = 0; x < w; ++x) {
        const Rgb bg = img.get(x, yi);
        img.set(x, yi, {std::min(bg.r, rule.r), std::min(bg.g, rule.g), std::min(bg.b, rule.b)});
      }
    }
  }

  const Mask ink_px = ink_mask(placements, glyphs, glyph_em, l);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      if (ink_px.at(x, y)) img.set(x, y, ink);
  return img;
}

}  // namespace simgen::glyphs
