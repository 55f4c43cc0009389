#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "simgen/core.hpp"

namespace simgen::physics {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline Vec3 operator+(Vec3 a, Vec3 b) noexcept { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Vec3 operator-(Vec3 a, Vec3 b) noexcept { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Vec3 operator-(Vec3 a) noexcept { return {-a.x, -a.y, -a.z}; }
inline Vec3 operator*(double s, Vec3 a) noexcept { return {s * a.x, s * a.y, s * a.z}; }
inline double dot(Vec3 a, Vec3 b) noexcept { return a.x * b.x + a.y * b.y + a.z * b.z; }
double norm(Vec3 a) noexcept;
Vec3 normalize(Vec3 a) noexcept;

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

// ---------------------------------------------------------------------------
// Chladni plates
// ---------------------------------------------------------------------------

struct ChladniMode {
  int m = 1;
  int n = 2;
  double amp = 1.0;
};

struct ChladniParams {
  std::vector<ChladniMode> modes{{1, 2, 1.0}};
  double plate = 1.0;
  double beta = 0.0;  // <= 0 selects the default 8 / median(|A|)
  std::size_t particles = 20000;
  double splat_radius = 1.0;
};

/// A(x,y) = sum amp*[cos(m pi x/L) cos(n pi y/L) - cos(n pi x/L) cos(m pi y/L)],
/// with grid cell i at x = L*i/(w-1).
Grid2D chladni_field(const ChladniParams& params, std::size_t width, std::size_t height);

/// 8 / median(|A|), the default inverse temperature.
double default_beta(const Grid2D& field);

/// Draws `count` positions with p(cell) proportional to exp(-beta*|A(cell)|)
/// by inverse CDF over the flattened grid, plus uniform sub-cell jitter.
std::vector<Point2> boltzmann_particles(const Grid2D& field, double beta, std::size_t count, Rng& rng);

/// Exact probability of each cell under the sampler above.
std::vector<double> boltzmann_pmf(const Grid2D& field, double beta);

/// Stamps a disc of `fg` per point. Order-independent.
RasterImage render_particles(const std::vector<Point2>& points, double splat_radius, std::size_t width,
                             std::size_t height, Rgb bg, Rgb fg);

// ---------------------------------------------------------------------------
// Caustics
// ---------------------------------------------------------------------------

struct WaveComponent {
  double amp = 0.0;
  double kx = 0.0;
  double ky = 0.0;
  double phase = 0.0;
};

struct WaveSurface {
  std::vector<WaveComponent> components;
};

double surface_height(const WaveSurface& s, double x, double y) noexcept;
Vec3 surface_normal(const WaveSurface& s, double x, double y) noexcept;

/// Transmitted direction, or nullopt on total internal reflection.
/// `normal` may face either side of the interface.
std::optional<Vec3> refract(Vec3 dir, Vec3 normal, double n1, double n2);

struct CausticsParams {
  WaveSurface surface;
  double n1 = 1.0;
  double n2 = 1.33;
  double depth = 40.0;
  std::size_t photons = 1'000'000;
  std::size_t bins_w = 256;
  std::size_t bins_h = 256;
  // Floor domain size in surface length units; one bin per unit when <= 0.
  double extent_x = 0.0;
  double extent_y = 0.0;
};

/// Raw per-bin photon counts on the periodic floor.
Grid<std::uint32_t> caustics_histogram(const CausticsParams& p, std::uint64_t seed);

/// Histogram tone-mapped with gamma 0.5.
RasterImage render_caustics(const CausticsParams& p, std::uint64_t seed);
RasterImage tone_map_caustics(const Grid<std::uint32_t>& bins);

// ---------------------------------------------------------------------------
// Hydraulic erosion
// ---------------------------------------------------------------------------

struct ErosionState {
  Grid2D height;    // rock/soil
  Grid2D water;     // >= 0
  Grid2D sediment;  // >= 0
};

struct ErosionParams {
  double rain = 0.01;
  double capacity = 1.0;   // Kc
  double dissolve = 0.3;   // Ks in (0,1]
  double deposit = 0.3;    // Kd in (0,1]
  double evaporation = 0.05;  // Ke in [0,1)
  int steps = 1;
};

void validate(const ErosionParams& p);

/// One synchronous pass: rain, head-driven flow, capacity exchange with
/// sediment transport, evaporation. Closed boundary. `rng` is accepted for
/// interface symmetry; the pass itself is deterministic.
ErosionState erosion_step(const ErosionState& state, const ErosionParams& p, Rng& rng);

/// Runs `p.steps` passes.
ErosionState erode(ErosionState state, const ErosionParams& p, Rng& rng);

RasterImage render_terrain(const ErosionState& state);

// ---------------------------------------------------------------------------
// Flame
// ---------------------------------------------------------------------------

struct FlameParams {
  Grid2D temperature{1, 1};
  Mask obstacles{1, 1};
  double inject_rate = 40.0;  // pulses per step (integer part; fraction drawn)
  double inject_heat = 4.0;
  double shell_boost = 1.5;   // heat multiplier for pulses next to obstacles
  double buoyancy = 0.6;      // c, cells/step per heat unit
  double jitter = 0.5;        // horizontal back-trace jitter amplitude, cells
  double alpha = 0.2;
  double kappa = 0.05;
};

void validate(const FlameParams& p);

FlameParams flame_step(const FlameParams& p, Rng& rng);

/// Log-shaped obstacle mask (two crossed ellipses near the bottom).
Mask log_obstacles(std::size_t width, std::size_t height);

/// Black -> red -> orange -> yellow -> white over [0, p99.5(T)].
RasterImage render_flame(const Grid2D& temperature);

}  // namespace simgen::physics
