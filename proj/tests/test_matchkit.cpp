#include <doctest.h>

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>

#include "simgen/matchkit.hpp"

using namespace simgen;
using namespace simgen::matchkit;

namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::Io;
}

// Synthetic manifest: `families` families with `seeds` entries each sharing params.
Manifest fake_manifest(std::size_t families, std::size_t seeds) {
  Manifest m;
  for (std::size_t f = 0; f < families; ++f)
    for (std::size_t s = 0; s < seeds; ++s) {
      ManifestEntry e;
      e.family = "fam" + std::to_string(f);
      e.seed = s;
      e.params = {{"p", static_cast<double>(f)}};
      e.id = e.family + "_" + std::to_string(s);
      e.path = "images/" + e.id + ".png";
      m.images.push_back(e);
    }
  return m;
}

RasterImage noise_image(std::size_t w, std::size_t h, Rng& rng, Rgb tint) {
  RasterImage img(w, h);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const auto n = static_cast<int>(rng.below(60));
      img.set(x, y,
              {static_cast<std::uint8_t>(std::min(255, tint.r + n)), static_cast<std::uint8_t>(std::min(255, tint.g + n)),
               static_cast<std::uint8_t>(std::min(255, tint.b + n))});
    }
  return img;
}

double block_sum(const std::vector<double>& v, std::size_t from, std::size_t to) {
  return std::accumulate(v.begin() + static_cast<std::ptrdiff_t>(from), v.begin() + static_cast<std::ptrdiff_t>(to), 0.0);
}

}  // namespace

TEST_CASE("assemble: ten families of two seeds give sound trials") {
  const auto m = fake_manifest(10, 2);
  Rng rng(1);
  const auto trials = assemble_trials(m, 200, Mode::Color, rng);
  REQUIRE(trials.size() == 200);
  std::set<std::string> ids;
  for (const auto& t : trials) {
    ids.insert(t.id);
    validate(t);
    REQUIRE(t.candidates.size() == 10);
    REQUIRE(t.truth_index.has_value());
    const auto* ref = m.find(t.reference);
    const auto* truth = m.find(t.candidates[*t.truth_index]);
    REQUIRE(ref != nullptr);
    REQUIRE(truth != nullptr);
    CHECK(truth->family == ref->family);
    CHECK(truth->seed != ref->seed);
    CHECK(truth->params == ref->params);
    CHECK(t.family == ref->family);
    std::set<std::string> fams;
    for (const auto& c : t.candidates) fams.insert(m.find(c)->family);
    CHECK(fams.size() == 10);
    CHECK(t.permutation[*t.truth_index] == 0);
  }
  CHECK(ids.size() == 200);
}

TEST_CASE("assemble: insufficient families or seeds") {
  Rng rng(2);
  CHECK(code_of([&] { assemble_trials(fake_manifest(5, 2), 10, Mode::Color, rng); }) == Errc::InsufficientFamilies);
  CHECK(code_of([&] { assemble_trials(fake_manifest(12, 1), 10, Mode::Color, rng); }) == Errc::InsufficientSeeds);
}

TEST_CASE("assemble: truth position is uniform over 10^4 trials") {
  Rng rng(3);
  const auto trials = assemble_trials(fake_manifest(12, 2), 10000, Mode::Gray, rng);
  std::vector<double> counts(10, 0.0);
  for (const auto& t : trials) {
    CHECK(t.mode == Mode::Gray);
    counts[*t.truth_index] += 1.0;
  }
  double stat = 0.0;
  for (double c : counts) stat += (c - 1000.0) * (c - 1000.0) / 1000.0;
  CHECK(boost::math::cdf(boost::math::complement(boost::math::chi_squared(9), stat)) > 0.001);
}

TEST_CASE("assemble: same-family decoy policy and determinism") {
  const auto m = fake_manifest(10, 12);
  Rng a(4);
  Rng b(4);
  const auto t1 = assemble_trials(m, 20, Mode::Color, a, DecoyPolicy::SameFamily);
  const auto t2 = assemble_trials(m, 20, Mode::Color, b, DecoyPolicy::SameFamily);
  CHECK(trials_to_json(t1) == trials_to_json(t2));
  for (const auto& t : t1) {
    validate(t);
    for (const auto& c : t.candidates) CHECK(m.find(c)->family == t.family);
  }
}

TEST_CASE("permutation soundness: score agrees with the truth index for every choice") {
  Rng rng(5);
  const auto trials = assemble_trials(fake_manifest(11, 3), 50, Mode::Color, rng);
  for (const auto& t : trials)
    for (std::size_t c = 0; c < 10; ++c) {
      const auto o = score({t.id, Evaluator::Human, c, 1.0, "", 0}, t);
      REQUIRE(o.correct == (c == *t.truth_index));
      REQUIRE(o.family == t.family);
    }
}

TEST_CASE("serialization: blinded trials, truths round trip and malformed input") {
  Rng rng(6);
  auto trials = assemble_trials(fake_manifest(10, 2), 5, Mode::Gray, rng);
  const auto blinded = trials_to_json(trials);
  CHECK(blinded.find("truth") == std::string::npos);
  CHECK(blinded.find("permutation") == std::string::npos);
  for (const auto& t : trials) CHECK(trial_view_json(t).find("truth") == std::string::npos);

  auto back = trials_from_json(blinded);
  REQUIRE(back.size() == 5);
  CHECK_FALSE(back[0].truth_index.has_value());
  CHECK(back[0].candidates == trials[0].candidates);
  CHECK(back[0].mode == Mode::Gray);
  attach_truths(back, truths_to_json(trials));
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(back[i].truth_index == trials[i].truth_index);
    CHECK(back[i].permutation == trials[i].permutation);
    CHECK(back[i].family == trials[i].family);
  }

  CHECK(code_of([] { trials_from_json("not json"); }) == Errc::MalformedTrials);
  CHECK(code_of([] { trials_from_json(R"({"trials":[{"id":"a","reference":"r","candidates":["x"],"mode":"color"}]})"); }) ==
        Errc::MalformedTrials);
  CHECK(code_of([] {
          trials_from_json(
              R"({"trials":[{"id":"a","reference":"r","candidates":["a","b","c","d","e","f","g","h","i","i"],"mode":"color"}]})");
        }) == Errc::MalformedTrials);
  CHECK(code_of([] {
          trials_from_json(
              R"({"trials":[{"id":"a","reference":"a","candidates":["a","b","c","d","e","f","g","h","i","j"],"mode":"color"}]})");
        }) == Errc::MalformedTrials);
  CHECK(code_of([] {
          trials_from_json(
              R"({"trials":[{"id":"a","reference":"r","candidates":["a","b","c","d","e","f","g","h","i","j"],"mode":"sepia"}]})");
        }) == Errc::MalformedTrials);
  CHECK(code_of([&] { attach_truths(back, R"({"truths":[{"trial_id":"zzz","truth_index":1}]})"); }) ==
        Errc::MalformedTrials);
}

TEST_CASE("features: identical images, constant image and block sums") {
  Rng rng(7);
  const auto img = noise_image(80, 50, rng, {40, 90, 160});
  for (auto mode : {Mode::Color, Mode::Gray}) {
    const auto f = perceptual_features(img, mode);
    CHECK(f == perceptual_features(img, mode));
    const std::size_t hist = mode == Mode::Color ? kColorBins : kGrayBins;
    REQUIRE(f.size() == hist + kOrientBins);
    CHECK(block_sum(f, 0, hist) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(block_sum(f, hist, f.size()) == doctest::Approx(1.0).epsilon(1e-12));
    for (double v : f) CHECK(v >= 0.0);
  }
  const auto flat = perceptual_features(RasterImage(40, 40, Rgb{200, 30, 90}), Mode::Color);
  CHECK(std::count_if(flat.begin(), flat.begin() + kColorBins, [](double v) { return v > 0.0; }) == 1);
  CHECK(*std::max_element(flat.begin(), flat.begin() + kColorBins) == 1.0);
  for (std::size_t i = kColorBins; i < flat.size(); ++i) CHECK(flat[i] == 0.0);
}

TEST_CASE("features: thumbnail box averages") {
  RasterImage img(128, 128, Rgb{0, 0, 0});
  for (std::size_t y = 0; y < 128; ++y) img.set(1, y, {255, 255, 255});
  const auto t = thumbnail(img);
  REQUIRE(t.size() == kThumb * kThumb * 3);
  CHECK(t[0] == doctest::Approx(127.5));
  CHECK(t[3] == 0.0);
}

TEST_CASE("features: gray mode ignores luminance-preserving hue changes") {
  Rng rng(8);
  RasterImage a(48, 48);
  RasterImage b(48, 48);
  for (std::size_t y = 0; y < 48; ++y)
    for (std::size_t x = 0; x < 48; ++x) {
      const Rgb c{static_cast<std::uint8_t>(rng.below(256)), static_cast<std::uint8_t>(rng.below(256)),
                  static_cast<std::uint8_t>(rng.below(256))};
      Rgb d = c;
      for (int tries = 0; tries < 100000; ++tries) {
        const Rgb e{static_cast<std::uint8_t>(rng.below(256)), static_cast<std::uint8_t>(rng.below(256)),
                    static_cast<std::uint8_t>(rng.below(256))};
        if (luma8(e) == luma8(c) && e != c) {
          d = e;
          break;
        }
      }
      a.set(x, y, c);
      b.set(x, y, d);
    }
  CHECK(a != b);
  CHECK(perceptual_features(a, Mode::Gray) == perceptual_features(b, Mode::Gray));
  CHECK(perceptual_features(a, Mode::Color) != perceptual_features(b, Mode::Color));
}

TEST_CASE("ranking: identical first, full ties, inverted reference, dimension check") {
  Rng rng(9);
  const auto ref_img = noise_image(32, 32, rng, {10, 120, 60});
  const auto ref = perceptual_features(ref_img, Mode::Color);
  std::vector<std::vector<double>> cands;
  for (int i = 0; i < 10; ++i) cands.push_back(perceptual_features(noise_image(32, 32, rng, {10, 120, 60}), Mode::Color));
  cands[6] = ref;
  CHECK(rank_candidates(ref, cands).front() == 6);

  const std::vector<std::vector<double>> same(10, cands[1]);
  std::vector<std::size_t> identity(10);
  std::iota(identity.begin(), identity.end(), 0);
  CHECK(rank_candidates(ref, same) == identity);

  RasterImage inverted = ref_img;
  for (auto& v : inverted.pixels()) v = static_cast<std::uint8_t>(255 - v);
  CHECK(rank_candidates(ref, {perceptual_features(inverted, Mode::Color), ref}).front() == 1);

  CHECK(cosine_similarity(ref, ref) == doctest::Approx(1.0));
  CHECK(code_of([&] { cosine_similarity(ref, std::vector<double>(3, 1.0)); }) == Errc::DimensionMismatch);
  CHECK(code_of([&] { rank_candidates(ref, {std::vector<double>(3, 1.0)}); }) == Errc::DimensionMismatch);
}

TEST_CASE("wilson interval and accuracy report") {
  const auto [lo, hi] = wilson_interval(74, 100);
  CHECK(lo == doctest::Approx(0.6462901055081282).epsilon(1e-12));
  CHECK(hi == doctest::Approx(0.8159530153525186).epsilon(1e-12));
  const auto [lo0, hi0] = wilson_interval(0, 10);
  CHECK(lo0 == doctest::Approx(0.0));
  CHECK(hi0 == doctest::Approx(0.27753279986288915).epsilon(1e-12));

  std::vector<MatchOutcome> outcomes;
  for (int i = 0; i < 100; ++i)
    outcomes.push_back({"t" + std::to_string(i), Evaluator::External, 0, i < 74, 1.0, i % 2 ? "a" : "b"});
  const auto r = accuracy_report(outcomes);
  CHECK(r.n == 100);
  CHECK(r.correct == 74);
  CHECK(r.accuracy == 0.74);
  CHECK(r.wilson_lo <= r.accuracy);
  CHECK(r.accuracy <= r.wilson_hi);
  CHECK(r.by_family.at("a").n == 50);
  CHECK(r.by_family.at("a").correct + r.by_family.at("b").correct == 74);
  CHECK(report_to_text(r).find("0.74") != std::string::npos);
  CHECK(report_to_json(r).find("\"accuracy\"") != std::string::npos);
  CHECK(code_of([] { accuracy_report({}); }) == Errc::EmptyResults);
}

TEST_CASE("results log lines round trip and reject garbage") {
  const LoggedChoice c{"t000003", Evaluator::Human, 7, 1234.5, "s1", 2};
  const auto line = choice_to_json_line(c);
  CHECK(line.find('\n') == std::string::npos);
  CHECK(line.find("correct") == std::string::npos);
  const auto back = choice_from_json_line(line);
  CHECK(back.trial_id == c.trial_id);
  CHECK(back.evaluator == c.evaluator);
  CHECK(back.choice == 7);
  CHECK(back.latency_ms == 1234.5);
  CHECK(back.session == "s1");
  CHECK(back.retries == 2);
  CHECK(code_of([] { choice_from_json_line("{oops"); }) == Errc::Parse);
  CHECK(code_of([] { choice_from_json_line(R"({"trial_id":"x","evaluator":"human","choice":12})"); }) == Errc::Parse);
}

TEST_CASE("random matcher sits at chance over 10^4 trials") {
  Rng rng(10);
  const auto trials = assemble_trials(fake_manifest(12, 2), 10000, Mode::Color, rng);
  ImageStore store(fake_manifest(12, 2), std::filesystem::temp_directory_path());
  EvalOptions opt;
  opt.matcher = Evaluator::Random;
  opt.seed = 99;
  const auto choices = run_eval(trials, store, opt);
  const auto report = accuracy_report(score_all(choices, trials));
  CHECK(report.n == 10000);
  CHECK(std::abs(report.accuracy - 0.10) <= 0.01);
}

TEST_CASE("perceptual matcher is perfect when the true candidate is the reference image") {
  const auto dir = std::filesystem::temp_directory_path() / "simgen_test_matchkit" / "ceiling";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir / "images");
  Rng rng(11);
  Manifest m = fake_manifest(10, 2);
  for (std::size_t f = 0; f < 10; ++f) {
    // Both seeds of a family point at the same file, so the truth is byte-identical.
    const auto img = noise_image(40, 40, rng, {static_cast<std::uint8_t>(20 * f), 80, static_cast<std::uint8_t>(200 - 15 * f)});
    save_image(img, dir / m.images[2 * f].path);
    m.images[2 * f + 1].path = m.images[2 * f].path;
  }
  ImageStore store(m, dir);
  const auto trials = assemble_trials(m, 60, Mode::Color, rng);
  for (auto mode : {Mode::Color, Mode::Gray}) {
    EvalOptions opt;
    opt.mode = mode;
    const auto report = accuracy_report(score_all(run_eval(trials, store, opt), trials));
    CHECK(report.accuracy == 1.0);
  }
  CHECK(code_of([&] { store.image("missing", Mode::Color); }) != Errc::BadParams);
}

TEST_CASE("score_all rejects unknown trial ids") {
  Rng rng(12);
  const auto trials = assemble_trials(fake_manifest(10, 2), 3, Mode::Color, rng);
  CHECK(code_of([&] { score_all({{"nope", Evaluator::Random, 1, 0.0, "", 0}}, trials); }) == Errc::MalformedTrials);
}
