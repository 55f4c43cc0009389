#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "simgen/core.hpp"

namespace simgen::glyphs {

struct ControlPoint {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const ControlPoint&, const ControlPoint&) = default;
};

/// Cubic Bezier in em-box coordinates ([0,1]^2, y down).
using Stroke = std::array<ControlPoint, 4>;

struct GlyphPrototype {
  std::vector<Stroke> strokes;  // 1..6
  double weight = 0.08;         // stroke thickness, em units
  friend bool operator==(const GlyphPrototype&, const GlyphPrototype&) = default;
};

enum class GlyphStyle { Brush, Print };

std::vector<GlyphPrototype> make_glyph_set(std::size_t n, GlyphStyle style, Rng& rng);

struct MarkovModel {
  std::vector<double> start;               // length S
  std::vector<std::vector<double>> trans;  // S x S, row-stochastic
};

void validate(const MarkovModel& m);

std::vector<std::size_t> markov_sample(const MarkovModel& m, std::size_t length, Rng& rng);

/// Random sparse-ish chain over `states` glyphs (each row favours a few successors).
MarkovModel random_markov_model(std::size_t states, Rng& rng);

/// Lengths from a geometric(p) distribution truncated to [1, max_len].
std::vector<int> sample_word_lengths(std::size_t count, double p, int max_len, Rng& rng);

struct PageLayout {
  std::size_t page_w = 512;
  std::size_t page_h = 512;
  double margin = 32.0;
  double line_height = 24.0;
  double word_gap = 0.6;         // em
  double baseline_jitter = 0.0;  // px; 0 for print
  double slant_jitter = 0.0;     // rad; 0 for print
  bool ruled = false;
};

void validate(const PageLayout& l);

struct Placement {
  std::size_t slot = 0;   // position in the glyph sequence
  std::size_t glyph = 0;  // index into the glyph set
  double x = 0.0;         // top-left of the em box
  double y = 0.0;
  double rotation = 0.0;
  friend bool operator==(const Placement&, const Placement&) = default;
};

/// Fills lines left to right; whole words wrap; stops at the bottom margin.
/// Jitter draws happen only when the corresponding jitter is nonzero.
std::vector<Placement> layout_page(const std::vector<int>& word_lengths, double glyph_em, const PageLayout& l,
                                   Rng& rng);

/// Sets placement.glyph = sequence[slot % sequence.size()].
void assign_glyphs(std::vector<Placement>& placements, const std::vector<std::size_t>& sequence);

/// Pixels inked for a given set of placements (same rule render_page uses).
Mask ink_mask(const std::vector<Placement>& placements, const std::vector<GlyphPrototype>& glyphs, double glyph_em,
              const PageLayout& l);

RasterImage render_page(const std::vector<Placement>& placements, const std::vector<GlyphPrototype>& glyphs,
                        Rgb ink, double glyph_em, const PageLayout& l, double texture_strength, std::uint64_t seed);

inline constexpr Rgb kPaper{246, 241, 228};

}  // namespace simgen::glyphs
