#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "simgen/error.hpp"

namespace simgen {

// ---------------------------------------------------------------------------
// Random numbers
// ---------------------------------------------------------------------------

/// SplitMix64. The only source of randomness in the library, so every
/// generator is bit-reproducible from its seed.
class Rng {
 public:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  constexpr explicit Rng(std::uint64_t seed = 0) noexcept : state_(seed) {}

  constexpr std::uint64_t next() noexcept {
    state_ += kGamma;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) from the top 53 bits.
  constexpr double unit() noexcept {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  /// Uniform in [lo, hi). Throws InvalidRange unless lo < hi, both finite.
  double uniform(double lo, double hi);

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n) noexcept;

  constexpr std::uint64_t state() const noexcept { return state_; }

 private:
  std::uint64_t state_;
};

/// Functional form: returns the output and the advanced state.
constexpr std::pair<std::uint64_t, std::uint64_t> rng_next(std::uint64_t state) noexcept {
  Rng r(state);
  const std::uint64_t v = r.next();
  return {v, r.state()};
}

/// Stateless 64-bit mix of a value (one SplitMix64 step from `x`).
constexpr std::uint64_t mix64(std::uint64_t x) noexcept { return Rng(x).next(); }

/// Derives an independent stream seed from a base seed and a salt.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) noexcept {
  return mix64(seed ^ mix64(salt + 0x632BE59BD9B4E019ULL));
}

// ---------------------------------------------------------------------------
// Grids
// ---------------------------------------------------------------------------

/// Row-major width x height field. Both sides are at least 1.
template <class T>
class Grid {
 public:
  Grid() : Grid(1, 1) {}
  Grid(std::size_t width, std::size_t height, T fill = T{})
      : width_(width), height_(height), values_(checked_size(width, height), fill) {}
  Grid(std::size_t width, std::size_t height, std::vector<T> values)
      : width_(width), height_(height), values_(std::move(values)) {
    if (values_.size() != checked_size(width, height))
      throw Error(Errc::ShapeMismatch, "grid value count does not match dimensions");
  }

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t size() const noexcept { return values_.size(); }

  T& at(std::size_t x, std::size_t y) { return values_[y * width_ + x]; }
  const T& at(std::size_t x, std::size_t y) const { return values_[y * width_ + x]; }
  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }

  std::span<T> values() noexcept { return values_; }
  std::span<const T> values() const noexcept { return values_; }

  bool same_shape(const Grid& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }
  template <class U>
  bool same_shape(const Grid<U>& other) const noexcept {
    return width_ == other.width() && height_ == other.height();
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  static std::size_t checked_size(std::size_t w, std::size_t h) {
    if (w == 0 || h == 0) throw Error(Errc::InvalidRange, "grid dimensions must be >= 1");
    return w * h;
  }

  std::size_t width_;
  std::size_t height_;
  std::vector<T> values_;
};

using Grid2D = Grid<double>;
using Mask = Grid<std::uint8_t>;

// ---------------------------------------------------------------------------
// Images
// ---------------------------------------------------------------------------

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// 8-bit RGB raster, row-major, 3 bytes per pixel.
class RasterImage {
 public:
  RasterImage() : RasterImage(1, 1) {}
  RasterImage(std::size_t width, std::size_t height, Rgb fill = {});
  RasterImage(std::size_t width, std::size_t height, std::vector<std::uint8_t> pixels);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }

  Rgb get(std::size_t x, std::size_t y) const noexcept {
    const std::size_t i = 3 * (y * width_ + x);
    return {pixels_[i], pixels_[i + 1], pixels_[i + 2]};
  }
  void set(std::size_t x, std::size_t y, Rgb c) noexcept {
    const std::size_t i = 3 * (y * width_ + x);
    pixels_[i] = c.r;
    pixels_[i + 1] = c.g;
    pixels_[i + 2] = c.b;
  }

  std::span<std::uint8_t> pixels() noexcept { return pixels_; }
  std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }

  friend bool operator==(const RasterImage&, const RasterImage&) = default;

 private:
  std::size_t width_;
  std::size_t height_;
  std::vector<std::uint8_t> pixels_;
};

/// Rec. 709 luma of an 8-bit color, unrounded.
constexpr double luma(Rgb c) noexcept { return 0.2126 * c.r + 0.7152 * c.g + 0.0722 * c.b; }

/// Luma rounded half-up to a byte.
std::uint8_t luma8(Rgb c) noexcept;

RasterImage to_gray(const RasterImage& img);

/// Maps v to t = clamp((v-lo)/(hi-lo), 0, 1) and interpolates linearly
/// between evenly spaced palette stops.
RasterImage field_to_image(const Grid2D& grid, std::span<const Rgb> palette, double lo, double hi);

/// Single-value version of the palette lookup used by field_to_image.
Rgb palette_lookup(std::span<const Rgb> palette, double t) noexcept;

/// Blend a -> b by t in [0,1], rounded.
Rgb lerp(Rgb a, Rgb b, double t) noexcept;

// ---------------------------------------------------------------------------
// PNG I/O and hashing
// ---------------------------------------------------------------------------

std::vector<std::uint8_t> encode_png(const RasterImage& img);
RasterImage decode_png(std::span<const std::uint8_t> bytes);

void save_image(const RasterImage& img, const std::filesystem::path& path);
RasterImage load_image(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, const std::string& text);

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(const std::string& text);
std::string base64_encode(std::span<const std::uint8_t> bytes);

// ---------------------------------------------------------------------------
// Generator specs and manifests
// ---------------------------------------------------------------------------

using ParamValue = std::variant<double, std::string, std::vector<double>>;
using ParamMap = std::map<std::string, ParamValue>;

struct GeneratorSpec {
  std::string family;
  ParamMap params;
  std::uint64_t seed = 0;
  friend bool operator==(const GeneratorSpec&, const GeneratorSpec&) = default;
};

struct ManifestEntry {
  std::string id;
  std::string family;
  std::uint64_t seed = 0;
  ParamMap params;
  std::string path;  // relative to the manifest's directory
  std::string sha256;
  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct Manifest {
  std::vector<ManifestEntry> images;

  const ManifestEntry* find(const std::string& id) const noexcept;
};

std::string spec_to_json(const GeneratorSpec& spec);
GeneratorSpec spec_from_json(const std::string& text);

std::string manifest_to_json(const Manifest& manifest);
Manifest manifest_from_json(const std::string& text);
Manifest load_manifest(const std::filesystem::path& path);

}  // namespace simgen
