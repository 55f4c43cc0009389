#include "simgen/core.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include <openssl/evp.h>
#include <openssl/sha.h>
#include <png.h>

#include "json.hpp"

namespace simgen {

using nlohmann::json;

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidRange: return "InvalidRange";
    case Errc::BadPalette: return "BadPalette";
    case Errc::Io: return "IoError";
    case Errc::Decode: return "DecodeError";
    case Errc::BadParams: return "BadParams";
    case Errc::DegenerateMode: return "DegenerateMode";
    case Errc::EmptyField: return "EmptyField";
    case Errc::NotUnit: return "NotUnit";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::Unstable: return "Unstable";
    case Errc::Parse: return "ParseError";
    case Errc::ExpansionTooLarge: return "ExpansionTooLarge";
    case Errc::UnbalancedBrackets: return "UnbalancedBrackets";
    case Errc::EmptyOutput: return "EmptyOutput";
    case Errc::NoRoots: return "NoRoots";
    case Errc::EmptyGraph: return "EmptyGraph";
    case Errc::ZeroMass: return "ZeroMass";
    case Errc::BadModel: return "BadModel";
    case Errc::GlyphTooLarge: return "GlyphTooLarge";
    case Errc::WordTooLong: return "WordTooLong";
    case Errc::NoPoints: return "NoPoints";
    case Errc::InsufficientFamilies: return "InsufficientFamilies";
    case Errc::InsufficientSeeds: return "InsufficientSeeds";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::JudgeTimeout: return "JudgeTimeout";
    case Errc::JudgeMalformed: return "JudgeMalformed";
    case Errc::JudgeUnavailable: return "JudgeUnavailable";
    case Errc::EmptyResults: return "EmptyResults";
    case Errc::UnknownFamily: return "UnknownFamily";
    case Errc::MalformedTrials: return "MalformedTrials";
    case Errc::PortBusy: return "PortBusy";
    case Errc::SessionExpired: return "SessionExpired";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::AlreadyAnswered: return "AlreadyAnswered";
    case Errc::UnknownTrial: return "UnknownTrial";
  }
  return "Unknown";
}

// --- Rng ---------------------------------------------------------------------

double Rng::uniform(double lo, double hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
    throw Error(Errc::InvalidRange, "uniform requires finite lo < hi");
  const double v = lo + (hi - lo) * unit();
  // lo + (hi-lo)*u can round up to hi for u just below 1.
  return v < hi ? v : std::nextafter(hi, lo);
}

std::uint64_t Rng::below(std::uint64_t n) noexcept {
  __extension__ using u128 = unsigned __int128;
  // Lemire's multiply-shift with rejection; unbiased.
  std::uint64_t x = next();
  u128 m = static_cast<u128>(x) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      x = next();
      m = static_cast<u128>(x) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

// --- Images ------------------------------------------------------------------

RasterImage::RasterImage(std::size_t width, std::size_t height, Rgb fill)
    : width_(width), height_(height) {
  if (width == 0 || height == 0) throw Error(Errc::InvalidRange, "image dimensions must be >= 1");
  pixels_.resize(3 * width * height);
  for (std::size_t i = 0; i < width * height; ++i) {
    pixels_[3 * i] = fill.r;
    pixels_[3 * i + 1] = fill.g;
    pixels_[3 * i + 2] = fill.b;
  }
}

RasterImage::RasterImage(std::size_t width, std::size_t height, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width == 0 || height == 0) throw Error(Errc::InvalidRange, "image dimensions must be >= 1");
  if (pixels_.size() != 3 * width * height)
    throw Error(Errc::ShapeMismatch, "pixel buffer must hold 3*width*height bytes");
}

std::uint8_t luma8(Rgb c) noexcept {
  const double y = std::floor(luma(c) + 0.5);
  return static_cast<std::uint8_t>(std::clamp(y, 0.0, 255.0));
}

RasterImage to_gray(const RasterImage& img) {
  RasterImage out = img;
  auto px = out.pixels();
  for (std::size_t i = 0; i < px.size(); i += 3) {
    const std::uint8_t y = luma8({px[i], px[i + 1], px[i + 2]});
    px[i] = px[i + 1] = px[i + 2] = y;
  }
  return out;
}

Rgb lerp(Rgb a, Rgb b, double t) noexcept {
  auto ch = [t](std::uint8_t x, std::uint8_t y) {
    const double v = x + (static_cast<double>(y) - x) * t;
    return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
  };
  return {ch(a.r, b.r), ch(a.g, b.g), ch(a.b, b.b)};
}

Rgb palette_lookup(std::span<const Rgb> palette, double t) noexcept {
  if (!(t > 0.0)) return palette.front();
  if (t >= 1.0) return palette.back();
  const double pos = t * static_cast<double>(palette.size() - 1);
  const auto seg = static_cast<std::size_t>(pos);
  return lerp(palette[seg], palette[seg + 1], pos - static_cast<double>(seg));
}

RasterImage field_to_image(const Grid2D& grid, std::span<const Rgb> palette, double lo, double hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
    throw Error(Errc::InvalidRange, "field_to_image requires lo < hi");
  if (palette.size() < 2) throw Error(Errc::BadPalette, "palette needs at least 2 stops");
  RasterImage img(grid.width(), grid.height());
  const double inv = 1.0 / (hi - lo);
  for (std::size_t y = 0; y < grid.height(); ++y)
    for (std::size_t x = 0; x < grid.width(); ++x)
      img.set(x, y, palette_lookup(palette, (grid.at(x, y) - lo) * inv));
  return img;
}

// --- Files -------------------------------------------------------------------

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::Io, "write failed for " + path.string());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

// --- PNG ---------------------------------------------------------------------

namespace {

struct PngReadCursor {
  std::span<const std::uint8_t> data;
  std::size_t offset = 0;
};

void png_read_from_span(png_structp png, png_bytep out, png_size_t n) {
  auto* cur = static_cast<PngReadCursor*>(png_get_io_ptr(png));
  if (cur->offset + n > cur->data.size()) png_error(png, "truncated PNG stream");
  std::copy_n(cur->data.data() + cur->offset, n, out);
  cur->offset += n;
}

void png_write_to_vector(png_structp png, png_bytep in, png_size_t n) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), in, in + n);
}

void png_flush_noop(png_structp) {}

[[noreturn]] void png_throw(png_structp, png_const_charp msg) { throw Error(Errc::Decode, msg); }
void png_warn_silent(png_structp, png_const_charp) {}

}  // namespace

std::vector<std::uint8_t> encode_png(const RasterImage& img) {
  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_throw, png_warn_silent);
  if (!png) throw Error(Errc::Io, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  try {
    png_set_write_fn(png, &out, png_write_to_vector, png_flush_noop);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()), static_cast<png_uint_32>(img.height()), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    // Fixed settings keep the encoded bytes (and their hashes) reproducible.
    png_set_compression_level(png, 6);
    png_set_filter(png, 0, PNG_FILTER_SUB);
    png_write_info(png, info);
    auto px = img.pixels();
    for (std::size_t y = 0; y < img.height(); ++y)
      png_write_row(png, const_cast<png_bytep>(px.data() + 3 * img.width() * y));
    png_write_end(png, nullptr);
  } catch (const Error& e) {
    png_destroy_write_struct(&png, &info);
    throw Error(Errc::Io, std::string("PNG encode failed: ") + e.what());
  }
  png_destroy_write_struct(&png, &info);
  return out;
}

RasterImage decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0)
    throw Error(Errc::Decode, "not a PNG file");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_throw, png_warn_silent);
  if (!png) throw Error(Errc::Decode, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  PngReadCursor cursor{bytes, 0};
  try {
    png_set_read_fn(png, &cursor, png_read_from_span);
    png_read_info(png, info);
    const auto width = png_get_image_width(png, info);
    const auto height = png_get_image_height(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
      if (depth < 8) png_set_expand_gray_1_2_4_to_8(png);
      png_set_gray_to_rgb(png);
    }
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);
    if (png_get_rowbytes(png, info) != 3 * width) throw Error(Errc::Decode, "unsupported PNG layout");
    std::vector<std::uint8_t> pixels(3 * static_cast<std::size_t>(width) * height);
    std::vector<png_bytep> rows(height);
    for (png_uint_32 y = 0; y < height; ++y) rows[y] = pixels.data() + 3 * static_cast<std::size_t>(width) * y;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return RasterImage(width, height, std::move(pixels));
  } catch (const Error& e) {
    png_destroy_read_struct(&png, &info, nullptr);
    if (e.code() == Errc::Decode) throw;
    throw Error(Errc::Decode, e.what());
  }
}

void save_image(const RasterImage& img, const std::filesystem::path& path) {
  write_file(path, encode_png(img));
}

RasterImage load_image(const std::filesystem::path& path) { return decode_png(read_file(path)); }

// --- Hashing -----------------------------------------------------------------

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  std::array<unsigned char, SHA256_DIGEST_LENGTH> digest{};
  SHA256(bytes.data(), bytes.size(), digest.data());
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * digest.size());
  for (unsigned char b : digest) {
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 0xF]);
  }
  return out;
}

std::string sha256_hex(const std::string& text) {
  return sha256_hex({reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

// --- Specs and manifests -----------------------------------------------------

namespace {

json params_to_json(const ParamMap& params) {
  json j = json::object();
  for (const auto& [key, value] : params)
    std::visit([&j, &key](const auto& v) { j[key] = v; }, value);
  return j;
}

ParamMap params_from_json(const json& j) {
  ParamMap out;
  if (j.is_null()) return out;
  if (!j.is_object()) throw Error(Errc::BadParams, "params must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (value.is_number()) {
      out[key] = value.get<double>();
    } else if (value.is_string()) {
      out[key] = value.get<std::string>();
    } else if (value.is_array()) {
      std::vector<double> list;
      for (const auto& item : value) {
        if (!item.is_number()) throw Error(Errc::BadParams, "param '" + key + "' must be a list of numbers");
        list.push_back(item.get<double>());
      }
      out[key] = std::move(list);
    } else {
      throw Error(Errc::BadParams, "param '" + key + "' has unsupported type");
    }
  }
  return out;
}

}  // namespace

const ManifestEntry* Manifest::find(const std::string& id) const noexcept {
  for (const auto& e : images)
    if (e.id == id) return &e;
  return nullptr;
}

std::string spec_to_json(const GeneratorSpec& spec) {
  json j;
  j["family"] = spec.family;
  j["params"] = params_to_json(spec.params);
  j["seed"] = spec.seed;
  return j.dump(2) + "\n";
}

GeneratorSpec spec_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    GeneratorSpec spec;
    spec.family = j.at("family").get<std::string>();
    spec.params = params_from_json(j.value("params", json::object()));
    spec.seed = j.value("seed", std::uint64_t{0});
    return spec;
  } catch (const json::exception& e) {
    throw Error(Errc::Decode, std::string("generator spec: ") + e.what());
  }
}

std::string manifest_to_json(const Manifest& manifest) {
  json images = json::array();
  for (const auto& e : manifest.images) {
    json j;
    j["id"] = e.id;
    j["family"] = e.family;
    j["seed"] = e.seed;
    j["params"] = params_to_json(e.params);
    j["path"] = e.path;
    j["sha256"] = e.sha256;
    images.push_back(std::move(j));
  }
  json root;
  root["images"] = std::move(images);
  return root.dump(2) + "\n";
}

Manifest manifest_from_json(const std::string& text) {
  try {
    const json root = json::parse(text);
    Manifest m;
    for (const auto& j : root.at("images")) {
      ManifestEntry e;
      e.id = j.at("id").get<std::string>();
      e.family = j.at("family").get<std::string>();
      e.seed = j.value("seed", std::uint64_t{0});
      e.params = params_from_json(j.value("params", json::object()));
      e.path = j.at("path").get<std::string>();
      e.sha256 = j.value("sha256", std::string{});
      m.images.push_back(std::move(e));
    }
    return m;
  } catch (const json::exception& e) {
    throw Error(Errc::Decode, std::string("manifest: ") + e.what());
  }
}

Manifest load_manifest(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return manifest_from_json(std::string(bytes.begin(), bytes.end()));
}

}  // namespace simgen
