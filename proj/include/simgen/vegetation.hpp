#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "simgen/core.hpp"

namespace simgen::vegetation {

struct Production {
  double weight = 1.0;
  std::string symbols;
  friend bool operator==(const Production&, const Production&) = default;
};

/// Stochastic, context-free L-system. Rules for one symbol are weighted
/// alternatives; symbols without a rule copy through unchanged.
struct LSystem {
  std::string axiom;
  std::map<char, std::vector<Production>> rules;
  double angle = 25.0;       // degrees
  double step = 10.0;        // px at depth 0
  double step_decay = 1.0;   // per bracket depth, (0,1]
  double width = 1.0;        // px at depth 0
  double width_decay = 1.0;  // per bracket depth, (0,1]
  friend bool operator==(const LSystem&, const LSystem&) = default;
};

/// Parses the line grammar:
///
///     # comment
///     axiom: X
///     angle: 22.5
///     step: 8
///     X -(0.7)-> F[+X][-X]
///     X -> F[-X]
///
/// Optional headers: step_decay, width, width_decay. Alternatives without a
/// probability share whatever weight the explicit ones leave.
/// Throws Errc::Parse with the offending line number.
LSystem parse_lsystem(std::string_view text);

/// Canonical text form; every alternative carries an explicit probability.
std::string format_lsystem(const LSystem& ls);

inline constexpr std::size_t kDefaultExpansionCap = 10'000'000;

std::string expand(const LSystem& ls, int generations, Rng& rng, std::size_t cap = kDefaultExpansionCap);

struct Segment {
  double x0, y0, x1, y1;
  double width;
  int depth;
};

struct Leaf {
  double cx, cy;
  double rx, ry;
  double rotation;  // radians
  int depth;
};

struct TurtleOutput {
  std::vector<Segment> segments;
  std::vector<Leaf> leaves;
};

/// Interprets F f + - [ ] L. Heading is in radians in image coordinates
/// (y down); -pi/2 points up. '+' turns counter-clockwise on screen.
TurtleOutput turtle_render(std::string_view symbols, const LSystem& ls, double origin_x = 0.0,
                           double origin_y = 0.0, double heading = -1.5707963267948966);

struct TreeStyle {
  Rgb background{236, 240, 228};
  Rgb bark{74, 52, 36};
  Rgb leaf{70, 140, 60};
};

/// Auto-fits all geometry into the image with a 5% margin, draws branches
/// then leaves on top.
RasterImage rasterize_tree(const TurtleOutput& t, std::size_t width, std::size_t height, const TreeStyle& style);

struct GrayScottParams {
  double feed = 0.037;
  double kill = 0.06;
  double du = 0.16;
  double dv = 0.08;
  double dt = 1.0;
  int steps = 1000;
};

void validate(const GrayScottParams& p);

struct GrayScottState {
  Grid2D u;
  Grid2D v;
};

/// Explicit Euler, periodic boundary, values clamped to [0, 2].
GrayScottState gray_scott(const Grid2D& u, const Grid2D& v, const GrayScottParams& p);

/// u = 1 everywhere, v = 0 except random square seeds (u=0.5, v=0.25).
GrayScottState gray_scott_seeded(std::size_t width, std::size_t height, std::size_t seeds, std::size_t seed_size,
                                 Rng& rng);

}  // namespace simgen::vegetation
