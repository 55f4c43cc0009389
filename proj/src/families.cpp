#include "simgen/families.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "simgen/glyphs.hpp"
#include "simgen/noise.hpp"
#include "simgen/patterns.hpp"
#include "simgen/physics.hpp"
#include "simgen/urban.hpp"
#include "simgen/vegetation.hpp"

namespace simgen::families {

namespace {

ParamDef num(std::string name, double def, double lo, double hi, std::string help) {
  return {std::move(name), ParamKind::Number, def, lo, hi, {}, 0, std::move(help)};
}
ParamDef integer(std::string name, double def, double lo, double hi, std::string help) {
  return {std::move(name), ParamKind::Integer, def, lo, hi, {}, 0, std::move(help)};
}
ParamDef choice(std::string name, std::string def, std::vector<std::string> choices, std::string help) {
  return {std::move(name), ParamKind::Text, std::move(def), 0, 0, std::move(choices), 0, std::move(help)};
}
ParamDef list_of(std::string name, std::vector<double> def, double lo, double hi, std::string help) {
  const std::size_t n = def.size();
  return {std::move(name), ParamKind::List, std::move(def), lo, hi, {}, n, std::move(help)};
}

std::size_t count(const ParamMap& p, const std::string& key) { return static_cast<std::size_t>(number(p, key)); }

double side(std::size_t w, std::size_t h) { return static_cast<double>(std::min(w, h)); }

// --- chladni -----------------------------------------------------------------

RasterImage render_chladni(const ParamMap& p, std::uint64_t seed, std::size_t w, std::size_t h) {
  physics::ChladniParams cp;
  cp.modes = {{static_cast<int>(number(p, "m")), static_cast<int>(number(p, "n")), 1.0}};
  cp.plate = number(p, "plate");
  const Grid2D field = physics::chladni_field(cp, w, h);
  const double beta = number(p, "beta") > 0.0 ? number(p, "beta") : physics::default_beta(field);
  Rng rng(derive_seed(seed, 1));
  const auto n = static_cast<std::size_t>(number(p, "density") * static_cast<double>(w * h));
  const auto pts = physics::boltzmann_particles(field, beta, n, rng);
  return physics::render_particles(pts, number(p, "splat"), w, h, {18, 18, 22}, {232, 212, 164});
}

void check_chladni(const ParamMap& p) {
  if (number(p, "m") == number(p, "n"))
    throw Error(Errc::BadParams, "parameter 'n' must differ from 'm' (equal indices give a zero field)");
}

// --- caustics ----------------------------------------------------------------

RasterImage render_caustics_family(const ParamMap& p, std::uint64_t seed, std::size_t w, std::size_t h) {
  physics::CausticsParams cp;
  Rng rng(derive_seed(seed, 1));
  const double amp = number(p, "amplitude");
  const double wl = number(p, "wavelength") * side(w, h);
  // Wave vectors are snapped to whole cycles across the image so the
  // surface, and therefore the wrapped floor pattern, tiles without seams.
  for (std::size_t i = 0; i < count(p, "waves"); ++i) {
    const double dir = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double k = 2.0 * std::numbers::pi / (wl * rng.uniform(0.6, 1.4));
    double cx = std::round(k * std::cos(dir) * static_cast<double>(w) / (2.0 * std::numbers::pi));
    const double cy = std::round(k * std::sin(dir) * static_cast<double>(h) / (2.0 * std::numbers::pi));
    if (cx == 0.0 && cy == 0.0) cx = 1.0;
    cp.surface.components.push_back({amp * rng.uniform(0.5, 1.0), 2.0 * std::numbers::pi * cx / static_cast<double>(w),
                                     2.0 * std::numbers::pi * cy / static_cast<double>(h),
                                     rng.uniform(0.0, 2.0 * std::numbers::pi)});
  }
  cp.n2 = number(p, "ior");
  cp.depth = number(p, "depth") * side(w, h);
  cp.photons = static_cast<std::size_t>(number(p, "photons_per_pixel") * static_cast<double>(w * h));
  cp.bins_w = w;
  cp.bins_h = h;
  return physics::render_caustics(cp, derive_seed(seed, 2));
}

// --- erosion -----------------------------------------------------------------

RasterImage render_erosion(const ParamMap& p, std::uint64_t seed, std::size_t w, std::size_t h) {
  Grid2D base = noise::fbm_field(w, h, 0.35 * side(w, h), {6, 2.0, 0.5}, derive_seed(seed, 1));
  const double relief = number(p, "relief");
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      // A gentle tilt gives water somewhere to go.
      const double tilt = 0.3 * static_cast<double>(y) / static_cast<double>(h);
      base.at(x, y) = relief * (base.at(x, y) + tilt);
    }
  physics::ErosionState st{base, Grid2D(w, h, 0.0), Grid2D(w, h, 0.0)};
  physics::ErosionParams ep;
  ep.rain = number(p, "rain");
  ep.capacity = number(p, "capacity");
  ep.dissolve = number(p, "dissolve");
  ep.deposit = number(p, "deposit");
  ep.evaporation = number(p, "evaporation");
  ep.steps = static_cast<int>(number(p, "steps"));
  Rng rng(derive_seed(seed, 2));
  return physics::render_terrain(physics::erode(std::move(st), ep, rng));
}

// --- flame -------------------------------------------------------------------

RasterImage render_flame_family(const ParamMap& p, std::uint64_t seed, std::size_t w, std::size_t h) {
  physics::FlameParams fp;
  fp.temperature = Grid2D(w, h, 0.0);
  fp.obstacles = physics::log_obstacles(w, h);
  fp.inject_rate = number(p, "inject_rate") * static_cast<double>(w) / 64.0;
  fp.inject_heat = number(p, "inject_heat");
  fp.buoyancy = number(p, "buoyancy");
  fp.shell_boost = number(p, "log_boost");
  fp.jitter = number(p, "jitter");
  fp.alpha = number(p, "alpha");
  fp.kappa = number(p, "kappa");
  Rng rng(derive_seed(seed, 1));
  for (std::size_t i = 0; i < count(p, "steps"); ++i) fp = physics::flame_step(fp, rng);
  return physics::render_flame(fp.temperature);
}

// --- tree --------------------------------------------------------------------

constexpr std::string_view kPresetPlant =
    "axiom: X\nangle: 25\nstep: 6\nstep_decay: 0.97\nwidth: 3\nwidth_decay: 0.8\n"
    "X -> F+[[X]-X]-F[-FX]+XL\nF -> FF\n";
constexpr std::string_view kPresetStochastic =
    "axiom: F\nangle: 25.7\nstep: 6\nstep_decay: 0.95\nwidth: 3\nwidth_decay: 0.75\n"
    "F -(0.34)-> F[+FL]F[-FL]F\nF -(0.33)-> F[+FL]F\nF -> F[-FL]F\n";
constexpr std::string_view kPresetBush =
    "axiom: F\nangle: 22.5\nstep: 6\nwidth: 2.5\nwidth_decay: 0.8\n"
    "F -> FF-[-F+F+FL]+[+F-F-FL]\n";

RasterImage render_tree(const ParamMap& p, std::uint64_t seed, std::size_t w, std::size_t h) {
  const std::string& preset = text(p, "preset");
  vegetation::LSystem ls = vegetation::parse_lsystem(preset == "plant" ? kPresetPlant
                                                     : preset == "bush" ? kPresetBush
                                                                        : kPresetStochastic);
  Rng rng(derive_seed(seed, 1));
  ls.angle += number(p, "angle_jitter") * rng.uniform(-1.0, 1.0);
  const std::string symbols = vegetation::expand(ls, static_cast<int>(number(p, "generations")), rng);
  const auto geometry = vegetation::turtle_render(symbols, ls);
  return vegetation::rasterize_tree(geometry, w, h, {});
}

// --- reaction-diffusion --------------------------------------------------------

RasterImage render_reaction(const ParamMap& p, std::uint64_t seed, std::size_t w, std::size_t h) {
  Rng rng(derive_seed(seed, 1));
  const auto init = vegetation::gray_scott_seeded(w, h, count(p, "seeds"), std::max<std::size_t>(3, w / 32), rng);
  vegetation::GrayScottParams gp;
  gp.feed = number(p, "feed");
  gp.kill = number(p, "kill");
  gp.steps = static_cast<int>(number(p, "steps"));
  const auto out = vegetation::gray_scott(init.u, init.v, gp);
  static const std::array<Rgb, 4> kPalette{{{12, 16, 40}, {24, 110, 130}, {160, 210, 190}, {250, 246, 220}}};
  return field_to_image(out.v, kPalette, 0.0, 0.4);
}

// --- city --------------------------------------------------------------------

RasterImage render_city_family(const ParamMap& p, std::uint64_t seed, std::size_t w, std::size_t h) {
  urban::CitySpec cs;
  cs.width = w;
  cs.height = h;
  cs.sea_fraction = number(p, "sea_fraction");
  cs.centers = count(p, "centers");
  cs.centric = text(p, "centric") == "mono" ? urban::Centric::Mono : urban::Centric::Poly;
  const std::string& model = text(p, "road_model");
  cs.road_model = model == "grid"           ? urban::RoadModel::Grid
                  : model == "preferential" ? urban::RoadModel::Preferential
                                            : urban::RoadModel::Colonize;
  cs.density = text(p, "density") == "sparse" ? urban::Density::Sparse : urban::Density::Dense;
  cs.mode = text(p, "mode") == "day" ? urban::RenderMode::Day : urban::RenderMode::Night;
  cs.seed = seed;
  return urban::generate_city(cs);
}

// --- glyph pages -------------------------------------------------------------

RasterImage render_page_family(const ParamMap& p, std::uint64_t seed, std::size_t w, std::size_t h,
                               glyphs::GlyphStyle style) {
  Rng rng(derive_seed(seed, 1));
  const bool brush = style == glyphs::GlyphStyle::Brush;
  const auto set = glyphs::make_glyph_set(count(p, "glyphs"), style, rng);
  const double em = number(p, "em") * static_cast<double>(w);
  glyphs::PageLayout layout;
  layout.page_w = w;
  layout.page_h = h;
  layout.margin = 0.07 * side(w, h);
  layout.line_height = number(p, "line_spacing") * em;
  layout.word_gap = brush ? 0.8 : 0.6;
  layout.baseline_jitter = brush ? 0.12 * em : 0.0;
  layout.slant_jitter = brush ? 0.15 : 0.0;
  layout.ruled = brush;

  // Enough words to fill the page; layout stops at the bottom margin.
  const double capacity = (static_cast<double>(w) / em) * (static_cast<double>(h) / layout.line_height);
  const auto words = glyphs::sample_word_lengths(static_cast<std::size_t>(capacity / 2.0) + 8, 0.3, 8, rng);
  auto placements = glyphs::layout_page(words, em, layout, rng);
  const auto model = glyphs::random_markov_model(set.size(), rng);
  glyphs::assign_glyphs(placements, glyphs::markov_sample(model, placements.size(), rng));
  const Rgb ink = brush ? Rgb{28, 30, 64} : Rgb{22, 22, 22};
  return glyphs::render_page(placements, set, ink, em, layout, number(p, "texture"), derive_seed(seed, 2));
}

// --- tiles -------------------------------------------------------------------

std::vector<Rgb> tile_palette(const std::string& name) {
  if (name == "slate") return {{70, 78, 88}, {92, 98, 106}, {58, 64, 74}, {110, 116, 120}};
  if (name == "ceramic") return {{228, 228, 222}, {40, 80, 150}, {210, 170, 60}, {236, 236, 230}};
  return {{176, 92, 60}, {196, 112, 72}, {150, 78, 52}, {206, 140, 96}};
}

RasterImage render_tiles(const ParamMap& p, std::uint64_t seed, std::size_t w, std::size_t h) {
  patterns::TilingSpec ts;
  const std::string& kind = text(p, "kind");
  ts.kind = kind == "brick"         ? patterns::TileKind::Brick
            : kind == "herringbone" ? patterns::TileKind::Herringbone
            : kind == "hex"         ? patterns::TileKind::Hex
                                    : patterns::TileKind::Square;
  const auto& tile = list(p, "tile");
  ts.tile_w = static_cast<std::size_t>(tile[0]);
  ts.tile_h = static_cast<std::size_t>(tile[1]);
  ts.grout = count(p, "grout");
  ts.palette = tile_palette(text(p, "palette"));
  ts.color_jitter = number(p, "color_jitter");
  ts.seed = derive_seed(seed, 1);
  auto tiling = patterns::tile_pattern(ts, w, h);
  Rng rng(derive_seed(seed, 2));
  RasterImage img = patterns::apply_chips(tiling.image, tiling.ids, number(p, "chip_prob"), derive_seed(seed, 3));
  img = patterns::apply_cracks(img, tiling.ids, count(p, "cracks"), number(p, "crack_persistence"), rng);
  return patterns::apply_stains(img, number(p, "stain_strength"), derive_seed(seed, 4));
}

// --- granulation -------------------------------------------------------------

RasterImage render_granulation(const ParamMap& p, std::uint64_t seed, std::size_t w, std::size_t h) {
  Rng rng(derive_seed(seed, 1));
  const auto pts = patterns::granule_seeds(w, h, count(p, "cells"), rng);
  patterns::VoronoiParams vp;
  vp.warp_amp = number(p, "warp_amp");
  vp.ridge_width = number(p, "ridge_width");
  return patterns::voronoi_shaded(pts, vp, w, h, derive_seed(seed, 2)).image;
}

RasterImage render_clouds(const ParamMap& p, std::uint64_t seed, std::size_t w, std::size_t h) {
  return patterns::cloud_field(w, h, number(p, "coverage"), number(p, "softness"), seed);
}

std::vector<Family> build_registry() {
  std::vector<Family> r;
  r.push_back({"chladni",
               "sand on a vibrating plate collecting along nodal lines",
               {integer("m", 3, 1, 32, "first mode index"), integer("n", 5, 1, 32, "second mode index"),
                num("plate", 1.0, 1e-3, 1e3, "plate side length"),
                num("beta", 0.0, 0.0, 1e6, "Boltzmann sharpness; 0 picks a default"),
                num("density", 0.5, 0.01, 4.0, "particles per pixel"),
                num("splat", 0.8, 0.0, 8.0, "particle radius in px")},
               render_chladni, check_chladni});
  r.push_back({"caustics",
               "light refracted through a wavy water surface onto the floor",
               {integer("waves", 5, 1, 32, "number of surface wave trains"),
                num("amplitude", 1.5, 0.0, 100.0, "wave amplitude in px"),
                num("wavelength", 0.25, 0.01, 4.0, "mean wavelength as a fraction of the image side"),
                num("depth", 1.0, 0.01, 10.0, "water depth as a fraction of the image side"),
                num("ior", 1.33, 1.0, 3.0, "refractive index of the water"),
                num("photons_per_pixel", 12.0, 0.1, 256.0, "photon budget")},
               render_caustics_family, {}});
  r.push_back({"erosion",
               "fBM terrain carved by rain, flow and sediment transport",
               {num("relief", 4.0, 0.01, 100.0, "height scale of the initial terrain"),
                integer("steps", 150, 0, 5000, "simulation steps"), num("rain", 0.01, 0.0, 1.0, "rain per step"),
                num("capacity", 1.0, 0.0, 100.0, "sediment capacity factor"),
                num("dissolve", 0.3, 1e-6, 1.0, "dissolution rate"), num("deposit", 0.3, 1e-6, 1.0, "deposition rate"),
                num("evaporation", 0.05, 0.0, 0.999, "evaporation fraction per step")},
               render_erosion, {}});
  r.push_back({"flame",
               "buoyant heat over burning logs (advection, diffusion, cooling)",
               {integer("steps", 160, 1, 5000, "simulation steps"),
                num("inject_rate", 8.0, 0.0, 10000.0, "heat pulses per step per 64 px of width"),
                num("inject_heat", 8.0, 0.0, 1000.0, "heat per pulse"),
                num("buoyancy", 0.6, 0.0, 10.0, "rise speed per heat unit"),
                num("log_boost", 10.0, 0.0, 100.0, "heat multiplier for pulses next to the logs"),
                num("jitter", 1.5, 0.0, 10.0, "horizontal sway of the back-trace, cells"),
                num("alpha", 0.2, 0.0, 0.25, "diffusion coefficient"), num("kappa", 0.1, 0.0, 1.0, "cooling rate")},
               render_flame_family, {}});
  r.push_back({"tree",
               "L-system plant drawn by a turtle",
               {choice("preset", "stochastic", {"stochastic", "plant", "bush"}, "grammar preset"),
                integer("generations", 5, 0, 8, "rewriting generations"),
                num("angle_jitter", 3.0, 0.0, 45.0, "seeded change to the branching angle, degrees")},
               render_tree, {}});
  r.push_back({"reaction_diffusion",
               "Gray-Scott spots and stripes",
               {num("feed", 0.037, 0.0, 0.2, "feed rate F"), num("kill", 0.06, 0.0, 0.2, "kill rate k"),
                integer("steps", 2500, 0, 50000, "Euler steps"), integer("seeds", 14, 1, 1000, "initial seed squares")},
               render_reaction, {}});
  r.push_back({"city",
               "night lights of a city grown on fBM geography",
               {num("sea_fraction", 0.3, 0.0, 0.95, "fraction of the map under water"),
                integer("centers", 3, 1, 16, "population centers"),
                choice("centric", "poly", {"poly", "mono"}, "single or multiple centers"),
                choice("road_model", "colonize", {"colonize", "preferential", "grid"}, "road growth model"),
                choice("density", "dense", {"dense", "sparse"}, "road density"),
                choice("mode", "night", {"night", "day"}, "rendering mode")},
               render_city_family, {}});
  r.push_back({"handwriting",
               "brush-stroke glyphs on textured paper, Markov glyph sequence",
               {integer("glyphs", 24, 1, 256, "glyph set size"), num("em", 0.05, 0.01, 0.5, "glyph size / width"),
                num("line_spacing", 1.6, 1.0, 4.0, "line height in em"),
                num("texture", 0.6, 0.0, 1.0, "paper texture strength")},
               [](const ParamMap& p, std::uint64_t s, std::size_t w, std::size_t h) {
                 return render_page_family(p, s, w, h, glyphs::GlyphStyle::Brush);
               },
               {}});
  r.push_back({"print",
               "uniform axis-aligned printed glyphs on clean paper",
               {integer("glyphs", 32, 1, 256, "glyph set size"), num("em", 0.035, 0.01, 0.5, "glyph size / width"),
                num("line_spacing", 1.4, 1.0, 4.0, "line height in em"),
                num("texture", 0.15, 0.0, 1.0, "paper texture strength")},
               [](const ParamMap& p, std::uint64_t s, std::size_t w, std::size_t h) {
                 return render_page_family(p, s, w, h, glyphs::GlyphStyle::Print);
               },
               {}});
  r.push_back({"tiles",
               "floor tiling with cracks, chips and stains",
               {choice("kind", "brick", {"square", "brick", "herringbone", "hex"}, "tiling kind"),
                list_of("tile", {24, 12}, 1, 4096, "tile width and height in px"),
                integer("grout", 2, 0, 64, "grout width in px"),
                choice("palette", "terracotta", {"terracotta", "slate", "ceramic"}, "tile colors"),
                num("color_jitter", 0.15, 0.0, 1.0, "per-tile brightness variation"),
                integer("cracks", 8, 0, 1000, "crack count"),
                num("crack_persistence", 0.7, 0.0, 0.999, "crack direction memory"),
                num("stain_strength", 0.5, 0.0, 1.0, "stain darkness"),
                num("chip_prob", 0.15, 0.0, 1.0, "fraction of chipped tiles")},
               render_tiles, {}});
  r.push_back({"granulation",
               "solar granulation from warped Voronoi cells",
               {integer("cells", 80, 1, 100000, "granule count"), num("warp_amp", 4.0, 0.0, 100.0, "warp in px"),
                num("ridge_width", 2.5, 0.0, 64.0, "dark lane width in px")},
               render_granulation, {}});
  r.push_back({"clouds",
               "fBM cloud layer over blue sky",
               {num("coverage", 0.45, 0.0, 1.0, "cloud fraction of the sky"),
                num("softness", 0.2, 0.0, 1.0, "edge softness")},
               render_clouds, {}});
  return r;
}

std::string kind_name(ParamKind k) {
  switch (k) {
    case ParamKind::Number: return "a number";
    case ParamKind::Integer: return "an integer";
    case ParamKind::Text: return "a string";
    case ParamKind::List: return "a list of numbers";
  }
  return "?";
}

std::string range_text(const ParamDef& d) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "[%g, %g]", d.lo, d.hi);
  return buf;
}

}  // namespace

const std::vector<Family>& registry() {
  static const std::vector<Family> r = build_registry();
  return r;
}

const Family& find_family(const std::string& name) {
  for (const auto& f : registry())
    if (f.name == name) return f;
  throw Error(Errc::UnknownFamily, "no generator family named '" + name + "'");
}

ParamMap resolve_params(const Family& fam, const ParamMap& given) {
  for (const auto& [key, value] : given) {
    const bool known = std::any_of(fam.params.begin(), fam.params.end(), [&](const ParamDef& d) { return d.name == key; });
    if (!known) throw Error(Errc::BadParams, "unknown parameter '" + key + "' for family " + fam.name);
  }
  ParamMap out;
  for (const auto& d : fam.params) {
    const auto it = given.find(d.name);
    const ParamValue& v = it == given.end() ? d.fallback : it->second;
    const std::string where = "parameter '" + d.name + "'";
    switch (d.kind) {
      case ParamKind::Number:
      case ParamKind::Integer: {
        const double* x = std::get_if<double>(&v);
        if (!x || !std::isfinite(*x)) throw Error(Errc::BadParams, where + " must be " + kind_name(d.kind));
        if (d.kind == ParamKind::Integer && *x != std::floor(*x))
          throw Error(Errc::BadParams, where + " must be an integer");
        if (*x < d.lo || *x > d.hi) throw Error(Errc::BadParams, where + " must be in " + range_text(d));
        break;
      }
      case ParamKind::Text: {
        const std::string* s = std::get_if<std::string>(&v);
        if (!s) throw Error(Errc::BadParams, where + " must be a string");
        if (std::find(d.choices.begin(), d.choices.end(), *s) == d.choices.end()) {
          std::string opts;
          for (const auto& c : d.choices) opts += (opts.empty() ? "" : "|") + c;
          throw Error(Errc::BadParams, where + " must be one of " + opts);
        }
        break;
      }
      case ParamKind::List: {
        const auto* xs = std::get_if<std::vector<double>>(&v);
        if (!xs || xs->size() != d.list_len)
          throw Error(Errc::BadParams, where + " must be a list of " + std::to_string(d.list_len) + " numbers");
        for (double x : *xs)
          if (!std::isfinite(x) || x < d.lo || x > d.hi)
            throw Error(Errc::BadParams, where + " elements must be in " + range_text(d));
        break;
      }
    }
    out[d.name] = v;
  }
  if (fam.check) fam.check(out);
  return out;
}

ParamMap resolve_params(const GeneratorSpec& spec) { return resolve_params(find_family(spec.family), spec.params); }

RasterImage generate(const GeneratorSpec& spec, std::size_t w, std::size_t h) {
  const Family& fam = find_family(spec.family);
  if (w < kMinSide || h < kMinSide)
    throw Error(Errc::BadParams, "image dimensions must be at least " + std::to_string(kMinSide));
  const ParamMap p = resolve_params(fam, spec.params);
  return fam.render(p, spec.seed, w, h);
}

double number(const ParamMap& p, const std::string& key) {
  const auto it = p.find(key);
  if (it == p.end()) throw Error(Errc::BadParams, "missing parameter '" + key + "'");
  if (const double* x = std::get_if<double>(&it->second)) return *x;
  throw Error(Errc::BadParams, "parameter '" + key + "' must be a number");
}

const std::string& text(const ParamMap& p, const std::string& key) {
  const auto it = p.find(key);
  if (it == p.end()) throw Error(Errc::BadParams, "missing parameter '" + key + "'");
  if (const auto* s = std::get_if<std::string>(&it->second)) return *s;
  throw Error(Errc::BadParams, "parameter '" + key + "' must be a string");
}

const std::vector<double>& list(const ParamMap& p, const std::string& key) {
  const auto it = p.find(key);
  if (it == p.end()) throw Error(Errc::BadParams, "missing parameter '" + key + "'");
  if (const auto* s = std::get_if<std::vector<double>>(&it->second)) return *s;
  throw Error(Errc::BadParams, "parameter '" + key + "' must be a list");
}

}  // namespace simgen::families
