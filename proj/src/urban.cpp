#include "simgen/urban.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <unordered_map>

#include "json.hpp"
#include "simgen/noise.hpp"

namespace simgen::urban {

using nlohmann::json;

// --- RoadGraph -----------------------------------------------------------------

std::vector<std::size_t> RoadGraph::degrees() const {
  std::vector<std::size_t> deg(nodes.size(), 0);
  for (const auto& [a, b] : edges) {
    ++deg[a];
    ++deg[b];
  }
  return deg;
}

bool RoadGraph::rooted_connected() const {
  std::vector<std::vector<std::size_t>> adj(nodes.size());
  for (const auto& [a, b] : edges) {
    if (a >= nodes.size() || b >= nodes.size() || a == b) return false;
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<std::uint8_t> seen(nodes.size(), 0);
  std::queue<std::size_t> q;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].kind == NodeKind::Root) {
      seen[i] = 1;
      q.push(i);
    }
  while (!q.empty()) {
    const std::size_t i = q.front();
    q.pop();
    for (std::size_t j : adj[i])
      if (!seen[j]) {
        seen[j] = 1;
        q.push(j);
      }
  }
  return std::all_of(seen.begin(), seen.end(), [](std::uint8_t s) { return s != 0; });
}

std::string road_graph_to_json(const RoadGraph& g) {
  json nodes = json::array();
  json kinds = json::array();
  for (const auto& n : g.nodes) {
    nodes.push_back({n.x, n.y});
    kinds.push_back(n.kind == NodeKind::Root ? "root" : "branch");
  }
  json edges = json::array();
  for (const auto& [a, b] : g.edges) edges.push_back({a, b});
  json root;
  root["nodes"] = std::move(nodes);
  root["edges"] = std::move(edges);
  root["kinds"] = std::move(kinds);
  return root.dump() + "\n";
}

RoadGraph road_graph_from_json(const std::string& text) {
  try {
    const json root = json::parse(text);
    RoadGraph g;
    const json& kinds = root.contains("kinds") ? root["kinds"] : json::array();
    for (std::size_t i = 0; i < root.at("nodes").size(); ++i) {
      const auto& n = root["nodes"][i];
      const bool is_root = i < kinds.size() && kinds[i] == "root";
      g.nodes.push_back({n.at(0).get<double>(), n.at(1).get<double>(), is_root ? NodeKind::Root : NodeKind::Branch});
    }
    for (const auto& e : root.at("edges")) g.edges.emplace_back(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>());
    return g;
  } catch (const json::exception& e) {
    throw Error(Errc::Decode, std::string("road graph: ") + e.what());
  }
}

// --- Geography and population ------------------------------------------------

Mask land_mask(std::size_t width, std::size_t height, double sea_fraction, std::uint64_t seed) {
  if (!(sea_fraction >= 0.0 && sea_fraction <= 1.0)) throw Error(Errc::BadParams, "sea_fraction must be in [0,1]");
  const double scale = 0.25 * static_cast<double>(std::max(width, height));
  const Grid2D elevation = noise::fbm_field(width, height, std::max(scale, 1.0), {5, 2.0, 0.5}, seed);
  const std::size_t n = width * height;
  // The epsilon keeps e.g. 0.3*10000 from flooring to 2999.
  const auto water = static_cast<std::size_t>(std::floor(sea_fraction * static_cast<double>(n) + 1e-9));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return elevation[a] < elevation[b]; });
  Mask mask(width, height, 1);
  for (std::size_t k = 0; k < std::min(water, n); ++k) mask[order[k]] = 0;
  return mask;
}

Grid2D population_field(const std::vector<Center>& centers, double sigma, const Mask& land) {
  if (!(sigma > 0.0)) throw Error(Errc::BadParams, "sigma must be > 0");
  Grid2D pop(land.width(), land.height(), 0.0);
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (std::size_t y = 0; y < land.height(); ++y)
    for (std::size_t x = 0; x < land.width(); ++x) {
      if (!land.at(x, y)) continue;
      double v = 0.0;
      for (const auto& c : centers) {
        const double dx = static_cast<double>(x) - c.x;
        const double dy = static_cast<double>(y) - c.y;
        v += c.weight * std::exp(-(dx * dx + dy * dy) * inv);
      }
      pop.at(x, y) = v;
    }
  return pop;
}

namespace {

/// Inverse-CDF sampler over grid cells, built once and reused.
class DensitySampler {
 public:
  explicit DensitySampler(const Grid2D& density) : width_(density.width()), cdf_(density.size()) {
    double total = 0.0;
    for (std::size_t i = 0; i < density.size(); ++i) {
      const double v = density[i];
      if (!(v >= 0.0) || !std::isfinite(v)) throw Error(Errc::BadParams, "density must be finite and >= 0");
      total += v;
      cdf_[i] = total;
    }
    if (!(total > 0.0)) throw Error(Errc::ZeroMass, "density has no positive mass");
  }

  Point draw(Rng& rng) const {
    const double u = rng.unit() * cdf_.back();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    const auto idx = std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
    const double jx = rng.unit();
    const double jy = rng.unit();
    return {static_cast<double>(idx % width_) + jx, static_cast<double>(idx / width_) + jy};
  }

 private:
  std::size_t width_;
  std::vector<double> cdf_;
};

/// Uniform bucket grid for radius queries over a growing point set.
class PointIndex {
 public:
  explicit PointIndex(double cell) : cell_(cell > 0.0 ? cell : 1.0) {}

  void insert(std::size_t id, double x, double y) { buckets_[key(cell_of(x), cell_of(y))].push_back(id); }

  template <class Fn>
  void for_each_near(double x, double y, Fn&& fn) const {
    const long cx = cell_of(x);
    const long cy = cell_of(y);
    for (long dy = -1; dy <= 1; ++dy)
      for (long dx = -1; dx <= 1; ++dx) {
        auto it = buckets_.find(key(cx + dx, cy + dy));
        if (it == buckets_.end()) continue;
        for (std::size_t id : it->second) fn(id);
      }
  }

 private:
  long cell_of(double v) const { return static_cast<long>(std::floor(v / cell_)); }
  static std::uint64_t key(long x, long y) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(x)) << 32) | static_cast<std::uint32_t>(y);
  }

  double cell_;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets_;
};

}  // namespace

std::vector<Point> sample_attractors(const Grid2D& density, std::size_t n, Rng& rng) {
  const DensitySampler sampler(density);
  std::vector<Point> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(sampler.draw(rng));
  return out;
}

// --- Road growth ---------------------------------------------------------------

RoadGraph space_colonization(const std::vector<Point>& roots, std::vector<Point> attractors,
                             const ColonizationParams& p) {
  return space_colonization(roots, std::move(attractors), p, nullptr);
}

RoadGraph space_colonization(const std::vector<Point>& roots, std::vector<Point> attractors,
                             const ColonizationParams& p, std::vector<std::size_t>* attractor_trace) {
  if (roots.empty()) throw Error(Errc::NoRoots, "space colonization needs at least one root");
  if (!(p.step > 0.0)) throw Error(Errc::BadParams, "step must be > 0");
  if (!(p.r_kill >= 0.0 && p.r_kill < p.r_influence))
    throw Error(Errc::BadParams, "need 0 <= r_kill < r_influence");

  RoadGraph g;
  PointIndex index(p.r_influence);
  for (const auto& r : roots) {
    index.insert(g.nodes.size(), r.x, r.y);
    g.nodes.push_back({r.x, r.y, NodeKind::Root});
  }

  const double kill2 = p.r_kill * p.r_kill;
  const double infl2 = p.r_influence * p.r_influence;
  auto kill_near = [&](std::size_t first_node) {
    std::erase_if(attractors, [&](const Point& a) {
      for (std::size_t i = first_node; i < g.nodes.size(); ++i) {
        const double dx = g.nodes[i].x - a.x;
        const double dy = g.nodes[i].y - a.y;
        if (dx * dx + dy * dy <= kill2) return true;
      }
      return false;
    });
  };
  kill_near(0);

  for (int iter = 0; iter < p.max_iters; ++iter) {
    std::vector<double> ax(g.nodes.size(), 0.0);
    std::vector<double> ay(g.nodes.size(), 0.0);
    std::vector<std::size_t> hits(g.nodes.size(), 0);
    bool influenced = false;
    for (const auto& a : attractors) {
      std::size_t best = g.nodes.size();
      double best_d2 = infl2;
      index.for_each_near(a.x, a.y, [&](std::size_t id) {
        const double dx = a.x - g.nodes[id].x;
        const double dy = a.y - g.nodes[id].y;
        const double d2 = dx * dx + dy * dy;
        if (d2 < best_d2 || (d2 == best_d2 && id < best)) {
          best_d2 = d2;
          best = id;
        }
      });
      if (best == g.nodes.size() || best_d2 == 0.0) continue;
      const double d = std::sqrt(best_d2);
      ax[best] += (a.x - g.nodes[best].x) / d;
      ay[best] += (a.y - g.nodes[best].y) / d;
      ++hits[best];
      influenced = true;
    }
    if (!influenced) break;

    const std::size_t first_new = g.nodes.size();
    for (std::size_t i = 0; i < first_new; ++i) {
      if (hits[i] == 0) continue;
      const double len = std::hypot(ax[i], ay[i]);
      if (len < 1e-12) continue;
      const double nx = g.nodes[i].x + p.step * ax[i] / len;
      const double ny = g.nodes[i].y + p.step * ay[i] / len;
      index.insert(g.nodes.size(), nx, ny);
      g.edges.emplace_back(i, g.nodes.size());
      g.nodes.push_back({nx, ny, NodeKind::Branch});
    }
    kill_near(first_new);
    if (attractor_trace) attractor_trace->push_back(attractors.size());
    if (g.nodes.size() == first_new) break;
  }
  return g;
}

RoadGraph preferential_growth(RoadGraph g, const Grid2D& density, std::size_t new_nodes, Rng& rng, double lambda) {
  if (g.nodes.empty()) throw Error(Errc::EmptyGraph, "preferential growth needs a nonempty graph");
  if (new_nodes == 0) return g;
  const DensitySampler sampler(density);
  if (!(lambda > 0.0)) lambda = 0.1 * static_cast<double>(density.width());

  std::vector<std::size_t> degree = g.degrees();
  std::vector<double> weight;
  for (std::size_t k = 0; k < new_nodes; ++k) {
    const Point p = sampler.draw(rng);
    weight.resize(g.nodes.size());
    double nearest = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      weight[i] = std::hypot(g.nodes[i].x - p.x, g.nodes[i].y - p.y);
      nearest = std::min(nearest, weight[i]);
    }
    double total = 0.0;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      // Shifted by the nearest distance; the normalization cancels the shift.
      weight[i] = static_cast<double>(degree[i] + 1) * std::exp(-(weight[i] - nearest) / lambda);
      total += weight[i];
    }
    const double u = rng.unit() * total;
    double acc = 0.0;
    std::size_t chosen = g.nodes.size() - 1;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      acc += weight[i];
      if (u < acc) {
        chosen = i;
        break;
      }
    }
    g.edges.emplace_back(chosen, g.nodes.size());
    g.nodes.push_back({p.x, p.y, NodeKind::Branch});
    ++degree[chosen];
    degree.push_back(1);
  }
  return g;
}

Subdivision grid_subdivide(const Rect& bbox, double min_block, double jitter, Rng& rng) {
  if (!(min_block > 0.0)) throw Error(Errc::BadParams, "min_block must be > 0");
  if (!(jitter >= 0.0 && jitter <= 0.3)) throw Error(Errc::BadParams, "jitter must be in [0, 0.3]");
  if (!(bbox.w > 0.0 && bbox.h > 0.0)) throw Error(Errc::BadParams, "bbox must have positive size");
  Subdivision out;
  std::vector<Rect> stack{bbox};
  while (!stack.empty()) {
    const Rect r = stack.back();
    stack.pop_back();
    if (std::max(r.w, r.h) <= 2.0 * min_block) {
      out.blocks.push_back(r);
      continue;
    }
    const double f = jitter > 0.0 ? 0.5 + jitter * rng.uniform(-1.0, 1.0) : 0.5;
    Rect a = r;
    Rect b = r;
    if (r.w >= r.h) {
      const double s = r.x + f * r.w;
      a.w = s - r.x;
      b.x = s;
      b.w = (r.x + r.w) - s;
      out.streets.push_back({s, r.y, s, r.y + r.h});
    } else {
      const double s = r.y + f * r.h;
      a.h = s - r.y;
      b.y = s;
      b.h = (r.y + r.h) - s;
      out.streets.push_back({r.x, s, r.x + r.w, s});
    }
    // Push the second half first so the first half is processed first.
    stack.push_back(b);
    stack.push_back(a);
  }
  return out;
}

// --- Rendering -----------------------------------------------------------------

namespace {

template <class Plot>
void draw_line(double x0, double y0, double x1, double y1, Plot&& plot) {
  const double len = std::hypot(x1 - x0, y1 - y0);
  const auto n = static_cast<std::size_t>(std::ceil(len)) + 1;
  for (std::size_t i = 0; i <= n; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(n);
    plot(x0 + t * (x1 - x0), y0 + t * (y1 - y0));
  }
}

Rgb add(Rgb a, double r, double g, double b) {
  auto ch = [](std::uint8_t v, double d) {
    return static_cast<std::uint8_t>(std::clamp(std::floor(v + d + 0.5), 0.0, 255.0));
  };
  return {ch(a.r, r), ch(a.g, g), ch(a.b, b)};
}

Rgb brighter(Rgb a, Rgb b) { return {std::max(a.r, b.r), std::max(a.g, b.g), std::max(a.b, b.b)}; }

}  // namespace

RasterImage render_city(const Mask& land, const Grid2D& population, const RoadGraph& g, const Subdivision& blocks,
                        RenderMode mode, std::uint64_t seed) {
  if (!land.same_shape(population)) throw Error(Errc::ShapeMismatch, "land and population dims differ");
  const std::size_t w = land.width();
  const std::size_t h = land.height();
  const bool night = mode == RenderMode::Night;
  const Rgb water = night ? Rgb{4, 8, 22} : Rgb{62, 112, 170};
  const Rgb land_base = night ? Rgb{14, 14, 18} : Rgb{204, 206, 190};

  double peak = 0.0;
  for (double v : population.values()) peak = std::max(peak, v);
  auto pop_at = [&](double x, double y) {
    if (peak <= 0.0) return 0.0;
    const auto xi = static_cast<std::size_t>(std::clamp(x, 0.0, static_cast<double>(w - 1)));
    const auto yi = static_cast<std::size_t>(std::clamp(y, 0.0, static_cast<double>(h - 1)));
    return population.at(xi, yi) / peak;
  };
  auto on_land = [&](double x, double y) {
    if (!(x >= 0.0 && y >= 0.0 && x < static_cast<double>(w) && y < static_cast<double>(h))) return false;
    return land.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y)) != 0;
  };

  RasterImage img(w, h);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      if (!land.at(x, y)) {
        img.set(x, y, water);
        continue;
      }
      const double pn = peak > 0.0 ? population.at(x, y) / peak : 0.0;
      img.set(x, y, night ? add(land_base, 18.0 * pn, 12.0 * pn, 4.0 * pn)
                          : add(land_base, -30.0 * pn, -34.0 * pn, -26.0 * pn));
    }

  auto plot = [&](double x, double y, Rgb c) {
    if (!on_land(x, y)) return;
    const auto xi = static_cast<std::size_t>(x);
    const auto yi = static_cast<std::size_t>(y);
    img.set(xi, yi, night ? brighter(img.get(xi, yi), c) : c);
  };

  if (!night)
    for (const auto& b : blocks.blocks) {
      const double inset = 1.0;
      for (double y = std::floor(b.y + inset); y < b.y + b.h - inset; y += 1.0)
        for (double x = std::floor(b.x + inset); x < b.x + b.w - inset; x += 1.0)
          if (on_land(x, y)) {
            const double pn = pop_at(x, y);
            img.set(static_cast<std::size_t>(x), static_cast<std::size_t>(y),
                    lerp(Rgb{222, 218, 206}, Rgb{176, 160, 150}, pn));
          }
    }

  auto road_color = [&](double pn) {
    return night ? lerp(Rgb{40, 32, 22}, Rgb{255, 196, 110}, std::sqrt(pn)) : Rgb{96, 96, 100};
  };
  for (const auto& s : blocks.streets) {
    const Rgb c = road_color(pop_at(0.5 * (s.x0 + s.x1), 0.5 * (s.y0 + s.y1)));
    draw_line(s.x0, s.y0, s.x1, s.y1, [&](double x, double y) {
      plot(x, y, night ? road_color(pop_at(x, y)) : c);
    });
  }
  for (const auto& [a, b] : g.edges) {
    const auto& p = g.nodes[a];
    const auto& q = g.nodes[b];
    const Rgb c = road_color(pop_at(0.5 * (p.x + q.x), 0.5 * (p.y + q.y)));
    draw_line(p.x, p.y, q.x, q.y, [&](double x, double y) { plot(x, y, c); });
  }

  if (night) {
    Rng rng(seed);
    auto lights_along = [&](double x0, double y0, double x1, double y1) {
      const double len = std::hypot(x1 - x0, y1 - y0);
      const double pn = pop_at(0.5 * (x0 + x1), 0.5 * (y0 + y1));
      const double expected = 0.35 * len * pn;
      auto count = static_cast<std::size_t>(expected);
      if (rng.unit() < expected - static_cast<double>(count)) ++count;
      for (std::size_t k = 0; k < count; ++k) {
        const double t = rng.unit();
        const double lx = x0 + t * (x1 - x0) + rng.uniform(-1.5, 1.5);
        const double ly = y0 + t * (y1 - y0) + rng.uniform(-1.5, 1.5);
        plot(lx, ly, Rgb{255, 236, 190});
      }
    };
    for (const auto& [a, b] : g.edges) lights_along(g.nodes[a].x, g.nodes[a].y, g.nodes[b].x, g.nodes[b].y);
    for (const auto& s : blocks.streets) lights_along(s.x0, s.y0, s.x1, s.y1);
  }
  return img;
}

// --- Pipeline ------------------------------------------------------------------

void validate(const CitySpec& spec) {
  if (spec.width < 1 || spec.height < 1) throw Error(Errc::BadParams, "city dims must be >= 1");
  if (!(spec.sea_fraction >= 0.0 && spec.sea_fraction <= 1.0))
    throw Error(Errc::BadParams, "sea_fraction must be in [0,1]");
  if (spec.centric == Centric::Poly && spec.centers < 1)
    throw Error(Errc::BadParams, "polycentric city needs at least one center");
}

RasterImage generate_city(const CitySpec& spec) {
  validate(spec);
  const std::size_t w = spec.width;
  const std::size_t h = spec.height;
  const double side = static_cast<double>(std::min(w, h));
  const bool dense = spec.density == Density::Dense;
  const double area_scale = static_cast<double>(w * h) / (512.0 * 512.0);

  const Mask land = land_mask(w, h, spec.sea_fraction, derive_seed(spec.seed, 1));
  Grid2D land_density(w, h, 0.0);
  for (std::size_t i = 0; i < land.size(); ++i) land_density[i] = land[i] ? 1.0 : 0.0;
  bool any_land = std::any_of(land.values().begin(), land.values().end(), [](std::uint8_t v) { return v != 0; });

  Rng rng(derive_seed(spec.seed, 2));
  const std::size_t k = spec.centric == Centric::Mono ? 1 : spec.centers;
  std::vector<Center> centers;
  if (any_land) {
    // Centers avoid the outer 10% so the mixture stays mostly in frame.
    Grid2D inner = land_density;
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        if (x < w / 10 || y < h / 10 || x >= w - w / 10 || y >= h - h / 10) inner.at(x, y) = 0.0;
    const bool inner_ok = std::any_of(inner.values().begin(), inner.values().end(), [](double v) { return v > 0.0; });
    for (const auto& p : sample_attractors(inner_ok ? inner : land_density, k, rng))
      centers.push_back({p.x, p.y, rng.uniform(0.6, 1.0)});
  }
  const double sigma = (spec.centric == Centric::Mono ? 0.18 : 0.10) * side;
  const Grid2D pop = population_field(centers, sigma, land);
  const bool populated = std::any_of(pop.values().begin(), pop.values().end(), [](double v) { return v > 0.0; });

  RoadGraph graph;
  Subdivision blocks;
  if (populated) {
    std::vector<Point> roots;
    for (const auto& c : centers) roots.push_back({c.x, c.y});
    switch (spec.road_model) {
      case RoadModel::Colonize: {
        const auto n = static_cast<std::size_t>((dense ? 2500.0 : 700.0) * area_scale) + 1;
        ColonizationParams cp;
        cp.r_influence = 0.12 * side;
        cp.r_kill = (dense ? 0.012 : 0.022) * side;
        cp.step = 0.010 * side;
        cp.max_iters = 300;
        graph = space_colonization(roots, sample_attractors(pop, n, rng), cp);
        break;
      }
      case RoadModel::Preferential: {
        for (const auto& r : roots) graph.nodes.push_back({r.x, r.y, NodeKind::Root});
        const auto n = static_cast<std::size_t>((dense ? 1600.0 : 500.0) * area_scale) + 1;
        graph = preferential_growth(std::move(graph), pop, n, rng, 0.04 * static_cast<double>(w));
        break;
      }
      case RoadModel::Grid: {
        const double min_block = (dense ? 0.025 : 0.05) * side;
        blocks = grid_subdivide({0.0, 0.0, static_cast<double>(w), static_cast<double>(h)}, std::max(min_block, 1.0),
                                0.15, rng);
        break;
      }
    }
  }
  return render_city(land, pop, graph, blocks, spec.mode, derive_seed(spec.seed, 3));
}

}  // namespace simgen::urban
