#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "simgen/core.hpp"

namespace simgen::families {

enum class ParamKind { Number, Integer, Text, List };

struct ParamDef {
  std::string name;
  ParamKind kind = ParamKind::Number;
  ParamValue fallback;
  double lo = 0.0;  // inclusive bounds for numbers and list elements
  double hi = 0.0;
  std::vector<std::string> choices;  // Text only
  std::size_t list_len = 0;          // List only
  std::string help;
};

using RenderFn = std::function<RasterImage(const ParamMap&, std::uint64_t seed, std::size_t w, std::size_t h)>;
using CheckFn = std::function<void(const ParamMap&)>;

struct Family {
  std::string name;
  std::string description;
  std::vector<ParamDef> params;
  RenderFn render;
  CheckFn check;  // cross-parameter constraints; may be empty
};

/// All registered families, in a fixed order.
const std::vector<Family>& registry();

/// Throws UnknownFamily.
const Family& find_family(const std::string& name);

/// Schema check plus defaults for missing keys. Throws BadParams with the
/// offending key in the message.
ParamMap resolve_params(const Family& fam, const ParamMap& given);
ParamMap resolve_params(const GeneratorSpec& spec);

inline constexpr std::size_t kMinSide = 16;

/// Validates, fills defaults and renders. Sides must be >= kMinSide.
RasterImage generate(const GeneratorSpec& spec, std::size_t w, std::size_t h);

double number(const ParamMap& p, const std::string& key);
const std::string& text(const ParamMap& p, const std::string& key);
const std::vector<double>& list(const ParamMap& p, const std::string& key);

struct GalleryOptions {
  std::filesystem::path out_dir;
  std::size_t per_family = 2;
  std::uint64_t seed = 0;  // image i of a family uses seed + i
  std::size_t width = 128;
  std::size_t height = 128;
  std::vector<std::string> families;  // empty = all registered
  std::size_t threads = 0;            // 0 = hardware concurrency
};

/// Opaque id: the first 16 hex digits of sha256 over family, seed and params.
std::string image_id(const GeneratorSpec& spec);

/// Renders every (family, seed) pair into out_dir/images and writes
/// out_dir/manifest.json. Throws Io when the directory cannot be written.
Manifest build_gallery(const GalleryOptions& opt);

}  // namespace simgen::families
