#include "simgen/physics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace simgen::physics {

double norm(Vec3 a) noexcept { return std::sqrt(dot(a, a)); }

Vec3 normalize(Vec3 a) noexcept {
  const double n = norm(a);
  return n > 0.0 ? (1.0 / n) * a : a;
}

// --- Chladni -------------------------------------------------------------------

Grid2D chladni_field(const ChladniParams& params, std::size_t width, std::size_t height) {
  if (params.modes.empty()) throw Error(Errc::BadParams, "chladni needs at least one mode");
  if (!(params.plate > 0.0)) throw Error(Errc::BadParams, "plate side must be > 0");
  for (const auto& mode : params.modes)
    if (mode.m == mode.n) throw Error(Errc::DegenerateMode, "mode with m == n is identically zero");

  const double L = params.plate;
  const double sx = width > 1 ? L / static_cast<double>(width - 1) : 0.0;
  const double sy = height > 1 ? L / static_cast<double>(height - 1) : 0.0;
  constexpr double pi = std::numbers::pi;

  Grid2D out(width, height);
  for (std::size_t j = 0; j < height; ++j) {
    const double y = sy * static_cast<double>(j);
    for (std::size_t i = 0; i < width; ++i) {
      const double x = sx * static_cast<double>(i);
      double a = 0.0;
      for (const auto& mode : params.modes) {
        const double m = mode.m;
        const double n = mode.n;
        a += mode.amp * (std::cos(m * pi * x / L) * std::cos(n * pi * y / L) -
                         std::cos(n * pi * x / L) * std::cos(m * pi * y / L));
      }
      out.at(i, j) = a;
    }
  }
  return out;
}

double default_beta(const Grid2D& field) {
  std::vector<double> mags(field.values().begin(), field.values().end());
  for (double& v : mags) v = std::abs(v);
  auto mid = mags.begin() + static_cast<std::ptrdiff_t>(mags.size() / 2);
  std::nth_element(mags.begin(), mid, mags.end());
  const double median = *mid;
  return 8.0 / std::max(median, 1e-12);
}

std::vector<double> boltzmann_pmf(const Grid2D& field, double beta) {
  if (field.size() == 0) throw Error(Errc::EmptyField, "field has no cells");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw Error(Errc::BadParams, "beta must be > 0");
  double lowest = std::abs(field[0]);
  for (double v : field.values()) lowest = std::min(lowest, std::abs(v));
  std::vector<double> w(field.size());
  // Shift by the minimum so the largest weight is exactly 1 (no underflow of Z).
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(-beta * (std::abs(field[i]) - lowest));
  const double z = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& v : w) v /= z;
  return w;
}

std::vector<Point2> boltzmann_particles(const Grid2D& field, double beta, std::size_t count, Rng& rng) {
  if (field.size() == 0) throw Error(Errc::EmptyField, "field has no cells");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw Error(Errc::BadParams, "beta must be > 0");
  double lowest = std::abs(field[0]);
  for (double v : field.values()) lowest = std::min(lowest, std::abs(v));
  std::vector<double> cdf(field.size());
  double total = 0.0;
  for (std::size_t i = 0; i < cdf.size(); ++i) {
    total += std::exp(-beta * (std::abs(field[i]) - lowest));
    cdf[i] = total;
  }
  std::vector<Point2> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double u = rng.unit() * total;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    const auto idx = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
    const double jx = rng.unit();
    const double jy = rng.unit();
    out.push_back({static_cast<double>(idx % field.width()) + jx, static_cast<double>(idx / field.width()) + jy});
  }
  return out;
}

RasterImage render_particles(const std::vector<Point2>& points, double splat_radius, std::size_t width,
                             std::size_t height, Rgb bg, Rgb fg) {
  if (!(splat_radius >= 0.0)) throw Error(Errc::BadParams, "splat_radius must be >= 0");
  RasterImage img(width, height, bg);
  const double r2 = splat_radius * splat_radius;
  const auto reach = static_cast<long>(std::ceil(splat_radius)) + 1;
  const auto w = static_cast<long>(width);
  const auto h = static_cast<long>(height);
  for (const auto& p : points) {
    if (!(p.x >= 0.0 && p.y >= 0.0 && p.x < static_cast<double>(width) && p.y < static_cast<double>(height)))
      continue;
    const auto cx = static_cast<long>(p.x);
    const auto cy = static_cast<long>(p.y);
    img.set(static_cast<std::size_t>(cx), static_cast<std::size_t>(cy), fg);
    for (long y = std::max(0L, cy - reach); y <= std::min(h - 1, cy + reach); ++y)
      for (long x = std::max(0L, cx - reach); x <= std::min(w - 1, cx + reach); ++x) {
        const double dx = static_cast<double>(x) + 0.5 - p.x;
        const double dy = static_cast<double>(y) + 0.5 - p.y;
        if (dx * dx + dy * dy <= r2) img.set(static_cast<std::size_t>(x), static_cast<std::size_t>(y), fg);
      }
  }
  return img;
}

// --- Water surface and refraction ----------------------------------------------

double surface_height(const WaveSurface& s, double x, double y) noexcept {
  double h = 0.0;
  for (const auto& c : s.components) h += c.amp * std::sin(c.kx * x + c.ky * y + c.phase);
  return h;
}

Vec3 surface_normal(const WaveSurface& s, double x, double y) noexcept {
  double hx = 0.0;
  double hy = 0.0;
  for (const auto& c : s.components) {
    const double d = c.amp * std::cos(c.kx * x + c.ky * y + c.phase);
    hx += d * c.kx;
    hy += d * c.ky;
  }
  return normalize({-hx, -hy, 1.0});
}

std::optional<Vec3> refract(Vec3 dir, Vec3 normal, double n1, double n2) {
  if (std::abs(norm(dir) - 1.0) > 1e-9 || std::abs(norm(normal) - 1.0) > 1e-9)
    throw Error(Errc::NotUnit, "refract expects unit vectors");
  if (!(n1 > 0.0) || !(n2 > 0.0)) throw Error(Errc::BadParams, "refractive indices must be > 0");
  double cos_i = -dot(normal, dir);
  if (cos_i < 0.0) {
    normal = -normal;
    cos_i = -cos_i;
  }
  const double eta = n1 / n2;
  const double k = 1.0 - eta * eta * (1.0 - cos_i * cos_i);
  if (k < 0.0) return std::nullopt;
  const Vec3 t = eta * dir + (eta * cos_i - std::sqrt(k)) * normal;
  return normalize(t);
}

// --- Caustics ------------------------------------------------------------------

Grid<std::uint32_t> caustics_histogram(const CausticsParams& p, std::uint64_t seed) {
  if (!(p.n1 > 0.0) || !(p.n2 > 0.0)) throw Error(Errc::BadParams, "refractive indices must be > 0");
  if (!(p.depth > 0.0)) throw Error(Errc::BadParams, "depth must be > 0");
  for (const auto& c : p.surface.components)
    if (!(c.amp >= 0.0) || !std::isfinite(c.kx) || !std::isfinite(c.ky) || !std::isfinite(c.phase))
      throw Error(Errc::BadParams, "wave components must be finite with amp >= 0");

  const double ex = p.extent_x > 0.0 ? p.extent_x : static_cast<double>(p.bins_w);
  const double ey = p.extent_y > 0.0 ? p.extent_y : static_cast<double>(p.bins_h);
  Grid<std::uint32_t> bins(p.bins_w, p.bins_h, 0u);
  Rng rng(seed);

  auto deposit = [&](double sx, double sy) {
    const double h = surface_height(p.surface, sx, sy);
    const Vec3 n = surface_normal(p.surface, sx, sy);
    double fx = sx;
    double fy = sy;
    // Totally reflected photons are kept at their launch column so the count is conserved.
    if (auto t = refract({0.0, 0.0, -1.0}, n, p.n1, p.n2); t && t->z < 0.0) {
      const double s = (-p.depth - h) / t->z;
      fx += s * t->x;
      fy += s * t->y;
    }
    fx -= ex * std::floor(fx / ex);
    fy -= ey * std::floor(fy / ey);
    auto bx = static_cast<std::size_t>(fx / ex * static_cast<double>(p.bins_w));
    auto by = static_cast<std::size_t>(fy / ey * static_cast<double>(p.bins_h));
    bx = std::min(bx, p.bins_w - 1);
    by = std::min(by, p.bins_h - 1);
    ++bins.at(bx, by);
  };

  const auto strata = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(p.photons))));
  for (std::size_t j = 0; j < strata; ++j)
    for (std::size_t i = 0; i < strata; ++i) {
      const double sx = (static_cast<double>(i) + rng.unit()) / static_cast<double>(strata) * ex;
      const double sy = (static_cast<double>(j) + rng.unit()) / static_cast<double>(strata) * ey;
      deposit(sx, sy);
    }
  for (std::size_t k = strata * strata; k < p.photons; ++k) {
    const double sx = rng.unit() * ex;
    const double sy = rng.unit() * ey;
    deposit(sx, sy);
  }
  return bins;
}

RasterImage tone_map_caustics(const Grid<std::uint32_t>& bins) {
  static const std::array<Rgb, 4> kPalette{{{0, 0, 0}, {8, 60, 90}, {90, 200, 220}, {255, 255, 255}}};
  const std::uint32_t peak = *std::max_element(bins.values().begin(), bins.values().end());
  RasterImage img(bins.width(), bins.height());
  if (peak == 0) return img;
  for (std::size_t y = 0; y < bins.height(); ++y)
    for (std::size_t x = 0; x < bins.width(); ++x) {
      const double t = std::sqrt(static_cast<double>(bins.at(x, y)) / static_cast<double>(peak));
      img.set(x, y, palette_lookup(kPalette, t));
    }
  return img;
}

RasterImage render_caustics(const CausticsParams& p, std::uint64_t seed) {
  return tone_map_caustics(caustics_histogram(p, seed));
}

// --- Erosion -------------------------------------------------------------------

void validate(const ErosionParams& p) {
  if (!(p.rain >= 0.0) || !(p.capacity >= 0.0)) throw Error(Errc::BadParams, "rain and capacity must be >= 0");
  if (!(p.dissolve > 0.0 && p.dissolve <= 1.0)) throw Error(Errc::BadParams, "dissolve rate must be in (0,1]");
  if (!(p.deposit > 0.0 && p.deposit <= 1.0)) throw Error(Errc::BadParams, "deposit rate must be in (0,1]");
  if (!(p.evaporation >= 0.0 && p.evaporation < 1.0))
    throw Error(Errc::BadParams, "evaporation must be in [0,1)");
  if (p.steps < 0) throw Error(Errc::BadParams, "steps must be >= 0");
}

namespace {

constexpr std::array<int, 4> kDx{1, -1, 0, 0};
constexpr std::array<int, 4> kDy{0, 0, 1, -1};

}  // namespace

ErosionState erosion_step(const ErosionState& state, const ErosionParams& p, Rng& /*rng*/) {
  validate(p);
  if (!state.height.same_shape(state.water) || !state.height.same_shape(state.sediment))
    throw Error(Errc::ShapeMismatch, "erosion grids must share dimensions");

  const std::size_t w = state.height.width();
  const std::size_t h = state.height.height();
  const std::size_t n = w * h;

  std::vector<double> H(state.height.values().begin(), state.height.values().end());
  std::vector<double> W(state.water.values().begin(), state.water.values().end());
  std::vector<double> S(state.sediment.values().begin(), state.sediment.values().end());

  for (double& v : W) v += p.rain;

  // Flow is computed from the post-rain snapshot only (double-buffered).
  std::vector<std::array<double, 4>> flow(n, {0.0, 0.0, 0.0, 0.0});
  std::vector<double> outflow(n, 0.0);
  std::vector<double> slope(n, 0.0);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t i = y * w + x;
      const double head = H[i] + W[i];
      std::array<double, 4> diff{};
      double total = 0.0;
      double steepest = 0.0;
      for (int k = 0; k < 4; ++k) {
        const long nx = static_cast<long>(x) + kDx[k];
        const long ny = static_cast<long>(y) + kDy[k];
        if (nx < 0 || ny < 0 || nx >= static_cast<long>(w) || ny >= static_cast<long>(h)) continue;
        const std::size_t j = static_cast<std::size_t>(ny) * w + static_cast<std::size_t>(nx);
        const double d = head - (H[j] + W[j]);
        if (d > 0.0) {
          diff[k] = d;
          total += d;
          steepest = std::max(steepest, d);
        }
      }
      slope[i] = steepest;
      if (total <= 0.0 || W[i] <= 0.0) continue;
      const double out = std::min(W[i], 0.5 * steepest);
      for (int k = 0; k < 4; ++k) flow[i][k] = out * diff[k] / total;
      outflow[i] = out;
    }

  // Capacity exchange, local to each cell.
  for (std::size_t i = 0; i < n; ++i) {
    const double capacity = p.capacity * outflow[i] * slope[i];
    if (S[i] < capacity) {
      const double dh = p.dissolve * (capacity - S[i]);
      H[i] -= dh;
      S[i] += dh;
    } else {
      const double ds = p.deposit * (S[i] - capacity);
      S[i] -= ds;
      H[i] += ds;
    }
  }

  // Transport water and the matching fraction of sediment.
  std::vector<double> W2 = W;
  std::vector<double> S2 = S;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t i = y * w + x;
      if (outflow[i] <= 0.0) continue;
      const double carried = S[i] * (outflow[i] / W[i]);
      W2[i] -= outflow[i];
      S2[i] -= carried;
      for (int k = 0; k < 4; ++k) {
        if (flow[i][k] <= 0.0) continue;
        const std::size_t j = static_cast<std::size_t>(static_cast<long>(y) + kDy[k]) * w +
                              static_cast<std::size_t>(static_cast<long>(x) + kDx[k]);
        W2[j] += flow[i][k];
        S2[j] += carried * (flow[i][k] / outflow[i]);
      }
    }

  for (std::size_t i = 0; i < n; ++i) {
    W2[i] = std::max(0.0, W2[i] * (1.0 - p.evaporation));
    S2[i] = std::max(0.0, S2[i]);
  }

  return {Grid2D(w, h, std::move(H)), Grid2D(w, h, std::move(W2)), Grid2D(w, h, std::move(S2))};
}

ErosionState erode(ErosionState state, const ErosionParams& p, Rng& rng) {
  validate(p);
  for (int s = 0; s < p.steps; ++s) state = erosion_step(state, p, rng);
  return state;
}

RasterImage render_terrain(const ErosionState& state) {
  static const std::array<Rgb, 4> kSand{{{96, 62, 34}, {168, 118, 68}, {214, 170, 112}, {240, 214, 168}}};
  const Grid2D& H = state.height;
  const auto [lo_it, hi_it] = std::minmax_element(H.values().begin(), H.values().end());
  const double lo = *lo_it;
  const double span = std::max(*hi_it - lo, 1e-12);
  const std::size_t w = H.width();
  const std::size_t h = H.height();
  RasterImage img(w, h);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const double hx = H.at(std::min(x + 1, w - 1), y) - H.at(x > 0 ? x - 1 : 0, y);
      const double hy = H.at(x, std::min(y + 1, h - 1)) - H.at(x, y > 0 ? y - 1 : 0);
      const double shade = std::clamp(0.75 + 6.0 * (hy - hx) / span, 0.35, 1.2);
      const Rgb base = palette_lookup(kSand, (H.at(x, y) - lo) / span);
      auto ch = [shade](std::uint8_t v) {
        return static_cast<std::uint8_t>(std::clamp(std::floor(v * shade + 0.5), 0.0, 255.0));
      };
      Rgb c{ch(base.r), ch(base.g), ch(base.b)};
      const double wet = std::clamp(state.water.at(x, y) * 4.0, 0.0, 0.6);
      img.set(x, y, lerp(c, Rgb{70, 60, 52}, wet));
    }
  return img;
}

// --- Flame ---------------------------------------------------------------------

void validate(const FlameParams& p) {
  if (!p.temperature.same_shape(p.obstacles)) throw Error(Errc::ShapeMismatch, "obstacle mask must match T");
  if (p.alpha > 0.25) throw Error(Errc::Unstable, "alpha must be <= 0.25 for the explicit scheme");
  if (!(p.alpha >= 0.0)) throw Error(Errc::BadParams, "alpha must be >= 0");
  if (!(p.kappa >= 0.0 && p.kappa <= 1.0)) throw Error(Errc::BadParams, "kappa must be in [0,1]");
  if (!(p.inject_rate >= 0.0) || !(p.inject_heat >= 0.0) || !(p.shell_boost >= 0.0))
    throw Error(Errc::BadParams, "injection parameters must be >= 0");
  if (!(p.buoyancy >= 0.0) || !(p.jitter >= 0.0)) throw Error(Errc::BadParams, "buoyancy and jitter must be >= 0");
}

FlameParams flame_step(const FlameParams& p, Rng& rng) {
  validate(p);
  const std::size_t w = p.temperature.width();
  const std::size_t h = p.temperature.height();
  const Mask& solid = p.obstacles;
  std::vector<double> T(p.temperature.values().begin(), p.temperature.values().end());

  // (1) stochastic injection
  const double whole = std::floor(p.inject_rate);
  std::size_t pulses = static_cast<std::size_t>(whole);
  if (const double frac = p.inject_rate - whole; frac > 0.0 && rng.unit() < frac) ++pulses;
  if (pulses > 0 && p.inject_heat > 0.0) {
    std::vector<std::size_t> cells;
    std::vector<std::uint8_t> is_shell;
    const std::size_t band = std::max<std::size_t>(1, (h + 9) / 10);
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        if (solid.at(x, y)) continue;
        bool shell = false;
        for (int dy = -1; dy <= 1 && !shell; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const long nx = static_cast<long>(x) + dx;
            const long ny = static_cast<long>(y) + dy;
            if (nx < 0 || ny < 0 || nx >= static_cast<long>(w) || ny >= static_cast<long>(h)) continue;
            if (solid.at(static_cast<std::size_t>(nx), static_cast<std::size_t>(ny))) {
              shell = true;
              break;
            }
          }
        if (shell || y >= h - band) {
          cells.push_back(y * w + x);
          is_shell.push_back(shell ? 1 : 0);
        }
      }
    if (!cells.empty())
      for (std::size_t k = 0; k < pulses; ++k) {
        const auto pick = static_cast<std::size_t>(rng.below(cells.size()));
        T[cells[pick]] += p.inject_heat * (is_shell[pick] ? p.shell_boost : 1.0);
      }
  }

  // (2) semi-Lagrangian advection: sample below by c*T, jittered per column.
  auto sample = [&](double sx, double sy) {
    sx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
    sy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
    const auto x0 = static_cast<std::size_t>(sx);
    const auto y0 = static_cast<std::size_t>(sy);
    const std::size_t x1 = std::min(x0 + 1, w - 1);
    const std::size_t y1 = std::min(y0 + 1, h - 1);
    const double fx = sx - static_cast<double>(x0);
    const double fy = sy - static_cast<double>(y0);
    auto at = [&](std::size_t x, std::size_t y) { return solid.at(x, y) ? 0.0 : T[y * w + x]; };
    const double top = at(x0, y0) + fx * (at(x1, y0) - at(x0, y0));
    const double bottom = at(x0, y1) + fx * (at(x1, y1) - at(x0, y1));
    return top + fy * (bottom - top);
  };
  std::vector<double> column_jitter(w, 0.0);
  if (p.jitter > 0.0)
    for (double& j : column_jitter) j = p.jitter * (2.0 * rng.unit() - 1.0);
  std::vector<double> A(T.size(), 0.0);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      if (solid.at(x, y)) continue;
      const double t = T[y * w + x];
      const double sx = static_cast<double>(x) - column_jitter[x];
      double sy = static_cast<double>(y) + p.buoyancy * t;
      // A back-trace stops at the first obstacle row below, so heat rising off a log is not zeroed.
      const auto col = static_cast<std::size_t>(std::clamp(std::lround(sx), 0L, static_cast<long>(w - 1)));
      const auto last = std::min(h - 1, static_cast<std::size_t>(std::ceil(std::clamp(sy, 0.0, static_cast<double>(h - 1)))));
      for (std::size_t yy = y + 1; yy <= last; ++yy)
        if (solid.at(col, yy)) {
          sy = std::min(sy, static_cast<double>(yy - 1));
          break;
        }
      A[y * w + x] = sample(sx, sy);
    }

  // (3) diffusion with reflective walls and obstacles
  std::vector<double> D = A;
  if (p.alpha > 0.0)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        if (solid.at(x, y)) continue;
        const double c = A[y * w + x];
        double lap = 0.0;
        for (int k = 0; k < 4; ++k) {
          const long nx = static_cast<long>(x) + kDx[k];
          const long ny = static_cast<long>(y) + kDy[k];
          if (nx < 0 || ny < 0 || nx >= static_cast<long>(w) || ny >= static_cast<long>(h)) continue;
          if (solid.at(static_cast<std::size_t>(nx), static_cast<std::size_t>(ny))) continue;
          lap += A[static_cast<std::size_t>(ny) * w + static_cast<std::size_t>(nx)] - c;
        }
        D[y * w + x] = c + p.alpha * lap;
      }

  // (4) height-dependent cooling, row 0 at the top
  if (p.kappa > 0.0)
    for (std::size_t y = 0; y < h; ++y) {
      const double factor = std::max(0.0, 1.0 - p.kappa * (1.0 - static_cast<double>(y) / static_cast<double>(h)));
      for (std::size_t x = 0; x < w; ++x) D[y * w + x] *= factor;
    }

  FlameParams out = p;
  out.temperature = Grid2D(w, h, std::move(D));
  return out;
}

Mask log_obstacles(std::size_t width, std::size_t height) {
  Mask mask(width, height, 0);
  const double cx = 0.5 * static_cast<double>(width);
  // Two crossed logs resting inside the bottom injection band.
  const double cy = 0.92 * static_cast<double>(height);
  const double a = 0.22 * static_cast<double>(width);
  const double b = std::max(1.5, 0.03 * static_cast<double>(height));
  for (const double angle : {0.2, -0.2}) {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    for (std::size_t y = 0; y < height; ++y)
      for (std::size_t x = 0; x < width; ++x) {
        const double dx = static_cast<double>(x) + 0.5 - cx;
        const double dy = static_cast<double>(y) + 0.5 - cy;
        const double u = c * dx + s * dy;
        const double v = -s * dx + c * dy;
        if ((u * u) / (a * a) + (v * v) / (b * b) <= 1.0) mask.at(x, y) = 1;
      }
  }
  return mask;
}

RasterImage render_flame(const Grid2D& temperature) {
  static const std::array<Rgb, 5> kFire{{{0, 0, 0}, {200, 20, 0}, {255, 130, 0}, {255, 230, 40}, {255, 255, 255}}};
  std::vector<double> sorted(temperature.values().begin(), temperature.values().end());
  std::sort(sorted.begin(), sorted.end());
  const auto rank = static_cast<std::size_t>(std::ceil(0.995 * static_cast<double>(sorted.size())));
  const double ref = std::max(sorted[std::max<std::size_t>(rank, 1) - 1], 1e-9);
  return field_to_image(temperature, kFire, 0.0, ref);
}

}  // namespace simgen::physics
