#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "simgen/core.hpp"

namespace simgen::urban {

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

enum class NodeKind { Root, Branch };

struct RoadNode {
  double x = 0.0;
  double y = 0.0;
  NodeKind kind = NodeKind::Branch;
  friend bool operator==(const RoadNode&, const RoadNode&) = default;
};

struct RoadGraph {
  std::vector<RoadNode> nodes;
  std::vector<std::pair<std::size_t, std::size_t>> edges;

  std::vector<std::size_t> degrees() const;
  /// True when every node can be reached from some root.
  bool rooted_connected() const;
  friend bool operator==(const RoadGraph&, const RoadGraph&) = default;
};

/// `{ "nodes": [[x,y],...], "edges": [[i,j],...] }`
std::string road_graph_to_json(const RoadGraph& g);
RoadGraph road_graph_from_json(const std::string& text);

/// Exactly floor(q*w*h) water cells (value 0); the lowest fBM samples go
/// under water, ties broken in row-major order.
Mask land_mask(std::size_t width, std::size_t height, double sea_fraction, std::uint64_t seed);

struct Center {
  double x = 0.0;
  double y = 0.0;
  double weight = 1.0;
};

/// Gaussian mixture, zero on water.
Grid2D population_field(const std::vector<Center>& centers, double sigma, const Mask& land);

/// i.i.d. draws proportional to density (inverse CDF, sub-cell jitter).
std::vector<Point> sample_attractors(const Grid2D& density, std::size_t n, Rng& rng);

struct ColonizationParams {
  double r_influence = 40.0;
  double r_kill = 6.0;
  double step = 4.0;
  int max_iters = 400;
};

RoadGraph space_colonization(const std::vector<Point>& roots, std::vector<Point> attractors,
                             const ColonizationParams& p);

/// As above, also reporting the attractor count after each iteration.
RoadGraph space_colonization(const std::vector<Point>& roots, std::vector<Point> attractors,
                             const ColonizationParams& p, std::vector<std::size_t>* attractor_trace);

/// Adds `new_nodes` nodes, each placed by density and linked to one existing
/// node with weight (degree+1)*exp(-d/lambda). lambda <= 0 means 10% of the
/// density grid width.
RoadGraph preferential_growth(RoadGraph g, const Grid2D& density, std::size_t new_nodes, Rng& rng,
                              double lambda = 0.0);

struct Rect {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;
  double area() const noexcept { return w * h; }
  friend bool operator==(const Rect&, const Rect&) = default;
};

struct Street {
  double x0, y0, x1, y1;
};

struct Subdivision {
  std::vector<Rect> blocks;
  std::vector<Street> streets;
};

/// Recursive split of the longer side at 0.5 +- jitter*U(-1,1); a block is
/// final once its longer side is <= 2*min_block.
Subdivision grid_subdivide(const Rect& bbox, double min_block, double jitter, Rng& rng);

enum class RenderMode { Night, Day };

RasterImage render_city(const Mask& land, const Grid2D& population, const RoadGraph& g, const Subdivision& blocks,
                        RenderMode mode, std::uint64_t seed);

enum class Centric { Mono, Poly };
enum class RoadModel { Colonize, Preferential, Grid };
enum class Density { Sparse, Dense };

struct CitySpec {
  std::size_t width = 512;
  std::size_t height = 512;
  double sea_fraction = 0.3;
  std::size_t centers = 3;
  Centric centric = Centric::Poly;
  RoadModel road_model = RoadModel::Colonize;
  Density density = Density::Dense;
  RenderMode mode = RenderMode::Night;
  std::uint64_t seed = 0;
};

void validate(const CitySpec& spec);

/// geography -> population -> roads -> lights.
RasterImage generate_city(const CitySpec& spec);

}  // namespace simgen::urban
