// Python bindings for the generators and the matching harness.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "simgen/families.hpp"
#include "simgen/matchkit.hpp"

namespace py = pybind11;
using namespace simgen;

namespace {

using ImageArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

ImageArray to_array(const RasterImage& img) {
  ImageArray out({img.height(), img.width(), std::size_t{3}});
  std::copy(img.pixels().begin(), img.pixels().end(), out.mutable_data());
  return out;
}

RasterImage from_array(const ImageArray& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw Error(Errc::ShapeMismatch, "expected an array of shape (h, w, 3)");
  const auto h = static_cast<std::size_t>(a.shape(0));
  const auto w = static_cast<std::size_t>(a.shape(1));
  return RasterImage(w, h, std::vector<std::uint8_t>(a.data(), a.data() + a.size()));
}

std::string kind_name(families::ParamKind k) {
  switch (k) {
    case families::ParamKind::Number: return "number";
    case families::ParamKind::Integer: return "integer";
    case families::ParamKind::Text: return "text";
    case families::ParamKind::List: return "list";
  }
  return "?";
}

py::list family_table() {
  py::list out;
  for (const auto& f : families::registry()) {
    py::list params;
    for (const auto& p : f.params) {
      py::dict d;
      d["name"] = p.name;
      d["kind"] = kind_name(p.kind);
      d["default"] = p.fallback;
      d["lo"] = p.lo;
      d["hi"] = p.hi;
      d["choices"] = p.choices;
      d["help"] = p.help;
      params.append(d);
    }
    py::dict d;
    d["name"] = f.name;
    d["description"] = f.description;
    d["params"] = params;
    out.append(d);
  }
  return out;
}

std::vector<matchkit::Trial> trials_with_truths(const std::string& trials_json, const std::string& truths_json) {
  auto trials = matchkit::trials_from_json(trials_json);
  matchkit::attach_truths(trials, truths_json);
  return trials;
}

}  // namespace

PYBIND11_MODULE(_simgen, m) {
  m.doc() = "Procedural image generators and an image-matching evaluation harness";
  py::register_exception<Error>(m, "SimgenError", PyExc_RuntimeError);

  m.def("family_table", &family_table, "Registered families with their parameter schemas");

  m.def(
      "resolve_params",
      [](const std::string& family, const ParamMap& params) {
        return families::resolve_params(families::find_family(family), params);
      },
      py::arg("family"), py::arg("params") = ParamMap{}, "Validate parameters and fill in defaults");

  m.def(
      "generate",
      [](const std::string& family, const ParamMap& params, std::uint64_t seed, std::size_t width,
         std::size_t height) {
        RasterImage img;
        {
          py::gil_scoped_release release;
          img = families::generate({family, params, seed}, width, height);
        }
        return to_array(img);
      },
      py::arg("family"), py::arg("params") = ParamMap{}, py::arg("seed") = 0, py::arg("width") = 256,
      py::arg("height") = 256, "Render one image as a (height, width, 3) uint8 array");

  m.def(
      "image_id",
      [](const std::string& family, const ParamMap& params, std::uint64_t seed) {
        return families::image_id({family, families::resolve_params(families::find_family(family), params), seed});
      },
      py::arg("family"), py::arg("params") = ParamMap{}, py::arg("seed") = 0);

  m.def(
      "build_gallery",
      [](const std::filesystem::path& out_dir, std::size_t per_family, std::uint64_t seed, std::size_t width,
         std::size_t height, std::vector<std::string> names, std::size_t threads) {
        families::GalleryOptions opt;
        opt.out_dir = out_dir;
        opt.per_family = per_family;
        opt.seed = seed;
        opt.width = width;
        opt.height = height;
        opt.families = std::move(names);
        opt.threads = threads;
        py::gil_scoped_release release;
        return manifest_to_json(families::build_gallery(opt));
      },
      py::arg("out_dir"), py::arg("per_family") = 2, py::arg("seed") = 0, py::arg("width") = 128,
      py::arg("height") = 128, py::arg("families") = std::vector<std::string>{}, py::arg("threads") = 0,
      "Render a gallery and return the manifest JSON");

  m.def(
      "assemble_trials",
      [](const std::string& manifest_json, std::size_t n, const std::string& mode, std::uint64_t seed,
         const std::string& decoys) {
        Rng rng(seed);
        const auto policy =
            decoys == "same" ? matchkit::DecoyPolicy::SameFamily : matchkit::DecoyPolicy::OtherFamilies;
        if (decoys != "same" && decoys != "other") throw Error(Errc::BadParams, "decoys must be 'other' or 'same'");
        const auto trials =
            matchkit::assemble_trials(manifest_from_json(manifest_json), n, matchkit::parse_mode(mode), rng, policy);
        return std::make_pair(matchkit::trials_to_json(trials), matchkit::truths_to_json(trials));
      },
      py::arg("manifest_json"), py::arg("n"), py::arg("mode") = "color", py::arg("seed") = 0,
      py::arg("decoys") = "other", "Return (blinded trials JSON, truths JSON)");

  m.def(
      "perceptual_features",
      [](const ImageArray& img, const std::string& mode) {
        return matchkit::perceptual_features(from_array(img), matchkit::parse_mode(mode));
      },
      py::arg("image"), py::arg("mode") = "color");

  m.def("cosine_similarity", &matchkit::cosine_similarity, py::arg("a"), py::arg("b"));
  m.def("rank_candidates", &matchkit::rank_candidates, py::arg("reference"), py::arg("candidates"),
        "Candidate indices by descending cosine similarity, ties by index");
  m.def("wilson_interval", &matchkit::wilson_interval, py::arg("correct"), py::arg("n"),
        py::arg("z") = matchkit::kWilsonZ, "95% Wilson score interval by default");

  m.def(
      "evaluate",
      [](const std::string& trials_json, const std::string& truths_json, const std::string& manifest_json,
         const std::filesystem::path& base_dir, const std::string& matcher, const std::string& mode,
         std::uint64_t seed) {
        const auto trials = trials_with_truths(trials_json, truths_json);
        matchkit::EvalOptions opt;
        opt.matcher = matchkit::parse_evaluator(matcher);
        if (!mode.empty()) opt.mode = matchkit::parse_mode(mode);
        opt.seed = seed;
        matchkit::ImageStore store(manifest_json.empty() ? Manifest{} : manifest_from_json(manifest_json), base_dir);
        py::gil_scoped_release release;
        const auto choices = matchkit::run_eval(trials, store, opt);
        return matchkit::report_to_json(matchkit::accuracy_report(matchkit::score_all(choices, trials)));
      },
      py::arg("trials_json"), py::arg("truths_json"), py::arg("manifest_json") = "", py::arg("base_dir") = ".",
      py::arg("matcher") = "perceptual", py::arg("mode") = "", py::arg("seed") = 0,
      "Run a matcher over trials and return the accuracy report JSON");

  m.def("to_gray", [](const ImageArray& img) { return to_array(to_gray(from_array(img))); }, py::arg("image"));
  m.def(
      "encode_png",
      [](const ImageArray& img) {
        const auto png = encode_png(from_array(img));
        return py::bytes(reinterpret_cast<const char*>(png.data()), png.size());
      },
      py::arg("image"));
  m.def(
      "decode_png",
      [](const py::bytes& data) {
        const std::string s = data;
        return to_array(decode_png(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size())));
      },
      py::arg("data"));
}
