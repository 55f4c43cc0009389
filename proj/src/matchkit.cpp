#include "simgen/matchkit.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <thread>

#include "json.hpp"

namespace simgen::matchkit {

using nlohmann::json;

std::string mode_name(Mode m) { return m == Mode::Gray ? "gray" : "color"; }

Mode parse_mode(const std::string& s) {
  if (s == "color") return Mode::Color;
  if (s == "gray") return Mode::Gray;
  throw Error(Errc::BadParams, "mode must be color or gray, got '" + s + "'");
}

std::string evaluator_name(Evaluator e) {
  switch (e) {
    case Evaluator::Perceptual: return "perceptual";
    case Evaluator::External: return "external";
    case Evaluator::Human: return "human";
    case Evaluator::Random: return "random";
  }
  return "?";
}

Evaluator parse_evaluator(const std::string& s) {
  for (Evaluator e : {Evaluator::Perceptual, Evaluator::External, Evaluator::Human, Evaluator::Random})
    if (evaluator_name(e) == s) return e;
  throw Error(Errc::BadParams, "unknown evaluator '" + s + "'");
}

// --- trial assembly ----------------------------------------------------------------

std::vector<Trial> assemble_trials(const Manifest& manifest, std::size_t n_trials, Mode mode, Rng& rng,
                                   DecoyPolicy policy) {
  std::map<std::string, std::vector<const ManifestEntry*>> by_family;
  for (const auto& e : manifest.images) by_family[e.family].push_back(&e);
  std::vector<std::string> names;
  for (const auto& [name, entries] : by_family) names.push_back(name);
  if (policy == DecoyPolicy::OtherFamilies && names.size() < kCandidates)
    throw Error(Errc::InsufficientFamilies,
                "need at least 10 generator families, manifest has " + std::to_string(names.size()));
  if (names.empty()) throw Error(Errc::InsufficientFamilies, "manifest is empty");

  std::vector<Trial> out;
  out.reserve(n_trials);
  char idbuf[32];
  for (std::size_t t = 0; t < n_trials; ++t) {
    const std::string& fam = names[rng.below(names.size())];
    const auto& group = by_family[fam];
    const ManifestEntry* ref = group[rng.below(group.size())];
    std::vector<const ManifestEntry*> siblings;
    for (const auto* e : group)
      if (e != ref && e->params == ref->params) siblings.push_back(e);
    if (siblings.empty())
      throw Error(Errc::InsufficientSeeds, "family '" + fam + "' has no second seed with the reference's params");
    const ManifestEntry* truth = siblings[rng.below(siblings.size())];

    std::vector<const ManifestEntry*> canonical{truth};
    if (policy == DecoyPolicy::OtherFamilies) {
      std::vector<std::string> others;
      for (const auto& n : names)
        if (n != fam) others.push_back(n);
      // Partial Fisher-Yates: the first nine slots become the decoy families.
      for (std::size_t i = 0; i + 1 < kCandidates; ++i) {
        const std::size_t j = i + rng.below(others.size() - i);
        std::swap(others[i], others[j]);
        const auto& pool = by_family[others[i]];
        canonical.push_back(pool[rng.below(pool.size())]);
      }
    } else {
      std::vector<const ManifestEntry*> pool;
      for (const auto* e : group)
        if (e != ref && e != truth) pool.push_back(e);
      if (pool.size() < kCandidates - 1)
        throw Error(Errc::InsufficientSeeds, "family '" + fam + "' needs 11 images for same-family decoys");
      for (std::size_t i = 0; i + 1 < kCandidates; ++i) {
        const std::size_t j = i + rng.below(pool.size() - i);
        std::swap(pool[i], pool[j]);
        canonical.push_back(pool[i]);
      }
    }

    std::vector<std::size_t> perm(kCandidates);
    for (std::size_t i = 0; i < kCandidates; ++i) perm[i] = i;
    for (std::size_t i = kCandidates - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);

    Trial trial;
    std::snprintf(idbuf, sizeof idbuf, "t%06zu", t);
    trial.id = idbuf;
    trial.reference = ref->id;
    trial.mode = mode;
    trial.family = fam;
    trial.permutation = perm;
    for (std::size_t i = 0; i < kCandidates; ++i) {
      trial.candidates.push_back(canonical[perm[i]]->id);
      if (perm[i] == 0) trial.truth_index = i;
    }
    out.push_back(std::move(trial));
  }
  return out;
}

void validate(const Trial& t) {
  auto bad = [&](const std::string& why) { throw Error(Errc::MalformedTrials, "trial '" + t.id + "': " + why); };
  if (t.id.empty()) bad("empty id");
  if (t.candidates.size() != kCandidates) bad("needs exactly 10 candidates");
  const std::set<std::string> uniq(t.candidates.begin(), t.candidates.end());
  if (uniq.size() != kCandidates) bad("candidates must be pairwise distinct");
  if (uniq.count(t.reference)) bad("reference appears among the candidates");
  if (t.truth_index && *t.truth_index >= kCandidates) bad("truth_index out of range");
  if (!t.permutation.empty()) {
    std::vector<std::size_t> sorted = t.permutation;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i)
      if (sorted[i] != i || sorted.size() != kCandidates) bad("permutation is not a permutation of 0..9");
    if (t.truth_index && t.permutation[*t.truth_index] != 0) bad("truth_index disagrees with permutation");
  }
}

// --- serialization -------------------------------------------------------------------

namespace {

json public_trial(const Trial& t) {
  return json{{"id", t.id}, {"reference", t.reference}, {"candidates", t.candidates}, {"mode", mode_name(t.mode)}};
}

}  // namespace

std::string trials_to_json(const std::vector<Trial>& trials) {
  json arr = json::array();
  for (const auto& t : trials) arr.push_back(public_trial(t));
  return json{{"trials", arr}}.dump(2) + "\n";
}

std::vector<Trial> trials_from_json(const std::string& text) {
  std::vector<Trial> out;
  try {
    const json doc = json::parse(text);
    for (const auto& j : doc.at("trials")) {
      Trial t;
      t.id = j.at("id").get<std::string>();
      t.reference = j.at("reference").get<std::string>();
      t.candidates = j.at("candidates").get<std::vector<std::string>>();
      t.mode = parse_mode(j.value("mode", std::string("color")));
      out.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    throw Error(Errc::MalformedTrials, std::string("trials document: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::MalformedTrials) throw;
    throw Error(Errc::MalformedTrials, e.what());
  }
  std::set<std::string> ids;
  for (const auto& t : out) {
    validate(t);
    if (!ids.insert(t.id).second) throw Error(Errc::MalformedTrials, "duplicate trial id '" + t.id + "'");
  }
  return out;
}

std::string truths_to_json(const std::vector<Trial>& trials) {
  json arr = json::array();
  for (const auto& t : trials) {
    if (!t.truth_index) throw Error(Errc::MalformedTrials, "trial '" + t.id + "' has no truth");
    arr.push_back({{"trial_id", t.id}, {"truth_index", *t.truth_index}, {"permutation", t.permutation},
                   {"family", t.family}});
  }
  return json{{"truths", arr}}.dump(2) + "\n";
}

void attach_truths(std::vector<Trial>& trials, const std::string& truths_text) {
  std::map<std::string, Trial*> index;
  for (auto& t : trials) index[t.id] = &t;
  try {
    const json doc = json::parse(truths_text);
    for (const auto& j : doc.at("truths")) {
      const auto id = j.at("trial_id").get<std::string>();
      const auto it = index.find(id);
      if (it == index.end()) throw Error(Errc::MalformedTrials, "truth for unknown trial '" + id + "'");
      Trial& t = *it->second;
      t.truth_index = j.at("truth_index").get<std::size_t>();
      t.permutation = j.at("permutation").get<std::vector<std::size_t>>();
      t.family = j.value("family", std::string());
      validate(t);
    }
  } catch (const json::exception& e) {
    throw Error(Errc::MalformedTrials, std::string("truths document: ") + e.what());
  }
  for (const auto& t : trials)
    if (!t.truth_index) throw Error(Errc::MalformedTrials, "no truth for trial '" + t.id + "'");
}

std::string trial_view_json(const Trial& t) { return public_trial(t).dump(); }

// --- features -------------------------------------------------------------------------------

std::vector<double> thumbnail(const RasterImage& img) {
  const std::size_t w = img.width();
  const std::size_t h = img.height();
  std::vector<double> out(kThumb * kThumb * 3, 0.0);
  for (std::size_t ty = 0; ty < kThumb; ++ty) {
    const std::size_t y0 = ty * h / kThumb;
    const std::size_t y1 = std::max(y0 + 1, (ty + 1) * h / kThumb);
    for (std::size_t tx = 0; tx < kThumb; ++tx) {
      const std::size_t x0 = tx * w / kThumb;
      const std::size_t x1 = std::max(x0 + 1, (tx + 1) * w / kThumb);
      double r = 0.0, g = 0.0, b = 0.0;
      for (std::size_t y = y0; y < y1; ++y)
        for (std::size_t x = x0; x < x1; ++x) {
          const Rgb c = img.get(x, y);
          r += c.r;
          g += c.g;
          b += c.b;
        }
      const double n = static_cast<double>((y1 - y0) * (x1 - x0));
      double* o = &out[3 * (ty * kThumb + tx)];
      o[0] = r / n;
      o[1] = g / n;
      o[2] = b / n;
    }
  }
  return out;
}

namespace {

void normalize_block(std::vector<double>& v, std::size_t from, std::size_t to) {
  double s = 0.0;
  for (std::size_t i = from; i < to; ++i) s += v[i];
  if (s <= 0.0) {
    std::fill(v.begin() + static_cast<std::ptrdiff_t>(from), v.begin() + static_cast<std::ptrdiff_t>(to), 0.0);
    return;
  }
  for (std::size_t i = from; i < to; ++i) v[i] /= s;
}

std::size_t bin_of(double value, std::size_t bins) {
  const auto b = static_cast<std::size_t>(std::max(0.0, value) * static_cast<double>(bins) / 256.0);
  return std::min(b, bins - 1);
}

}  // namespace

std::vector<double> perceptual_features(const RasterImage& input, Mode mode) {
  const RasterImage img = mode == Mode::Gray ? to_gray(input) : input;
  const std::vector<double> th = thumbnail(img);
  const std::size_t n = kThumb * kThumb;
  const std::size_t head = mode == Mode::Gray ? kGrayBins : kColorBins;
  std::vector<double> f(head + kOrientBins, 0.0);

  std::vector<double> lum(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = th[3 * i], g = th[3 * i + 1], b = th[3 * i + 2];
    lum[i] = 0.2126 * r + 0.7152 * g + 0.0722 * b;
    if (mode == Mode::Gray) {
      f[bin_of(lum[i], kGrayBins)] += 1.0;
    } else {
      f[bin_of(r, 8) * 64 + bin_of(g, 8) * 8 + bin_of(b, 8)] += 1.0;
    }
  }
  normalize_block(f, 0, head);

  for (std::size_t y = 1; y + 1 < kThumb; ++y)
    for (std::size_t x = 1; x + 1 < kThumb; ++x) {
      const double gx = 0.5 * (lum[y * kThumb + x + 1] - lum[y * kThumb + x - 1]);
      const double gy = 0.5 * (lum[(y + 1) * kThumb + x] - lum[(y - 1) * kThumb + x]);
      const double mag = std::hypot(gx, gy);
      if (mag <= 0.0) continue;
      double ang = std::atan2(gy, gx);
      if (ang < 0.0) ang += 2.0 * std::numbers::pi;
      auto b = static_cast<std::size_t>(ang / (2.0 * std::numbers::pi) * static_cast<double>(kOrientBins));
      f[head + std::min(b, kOrientBins - 1)] += mag;
    }
  normalize_block(f, head, head + kOrientBins);
  return f;
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw Error(Errc::DimensionMismatch, "feature vectors differ in length");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na <= 0.0 || nb <= 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<std::size_t> rank_candidates(const std::vector<double>& ref,
                                         const std::vector<std::vector<double>>& cands) {
  struct Key {
    bool exact;
    double cos;
    std::size_t index;
  };
  std::vector<Key> keys;
  keys.reserve(cands.size());
  for (std::size_t i = 0; i < cands.size(); ++i) {
    if (cands[i].size() != ref.size())
      throw Error(Errc::DimensionMismatch, "candidate " + std::to_string(i) + " has a different feature length");
    keys.push_back({cands[i] == ref, cosine_similarity(ref, cands[i]), i});
  }
  std::sort(keys.begin(), keys.end(), [](const Key& a, const Key& b) {
    if (a.exact != b.exact) return a.exact;
    if (a.cos != b.cos) return a.cos > b.cos;
    return a.index < b.index;
  });
  std::vector<std::size_t> order;
  order.reserve(keys.size());
  for (const auto& k : keys) order.push_back(k.index);
  return order;
}

// --- image store ------------------------------------------------------------------------------

ImageStore::ImageStore(Manifest manifest, std::filesystem::path base_dir)
    : manifest_(std::move(manifest)), base_(std::move(base_dir)) {}

RasterImage ImageStore::image(const std::string& id, Mode mode) {
  {
    std::lock_guard lock(mu_);
    const auto it = images_.find({id, mode});
    if (it != images_.end()) return it->second;
  }
  const ManifestEntry* e = manifest_.find(id);
  if (!e) throw Error(Errc::MalformedTrials, "image id '" + id + "' is not in the manifest");
  const std::filesystem::path rel(e->path);
  const std::filesystem::path p = rel.is_absolute() ? rel : base_ / rel;
  RasterImage img = load_image(p);
  if (mode == Mode::Gray) img = to_gray(img);
  std::lock_guard lock(mu_);
  return images_.emplace(std::make_pair(id, mode), std::move(img)).first->second;
}

std::vector<std::uint8_t> ImageStore::png(const std::string& id, Mode mode) { return encode_png(image(id, mode)); }

std::vector<double> ImageStore::features(const std::string& id, Mode mode) {
  {
    std::lock_guard lock(mu_);
    const auto it = features_.find({id, mode});
    if (it != features_.end()) return it->second;
  }
  std::vector<double> f = perceptual_features(image(id, mode), mode);
  std::lock_guard lock(mu_);
  return features_.emplace(std::make_pair(id, mode), std::move(f)).first->second;
}

// --- outcomes -----------------------------------------------------------------------------------

std::string choice_to_json_line(const LoggedChoice& c) {
  json j{{"trial_id", c.trial_id},
         {"evaluator", evaluator_name(c.evaluator)},
         {"choice", c.choice},
         {"latency_ms", c.latency_ms}};
  if (!c.session.empty()) j["session"] = c.session;
  if (c.retries) j["retries"] = c.retries;
  return j.dump();
}

LoggedChoice choice_from_json_line(const std::string& line) {
  try {
    const json j = json::parse(line);
    LoggedChoice c;
    c.trial_id = j.at("trial_id").get<std::string>();
    c.evaluator = parse_evaluator(j.at("evaluator").get<std::string>());
    c.choice = j.at("choice").get<std::size_t>();
    c.latency_ms = j.value("latency_ms", 0.0);
    c.session = j.value("session", std::string());
    c.retries = j.value("retries", std::size_t{0});
    if (c.choice >= kCandidates) throw Error(Errc::Parse, "choice out of range");
    return c;
  } catch (const json::exception& e) {
    throw Error(Errc::Parse, std::string("results log line: ") + e.what());
  }
}

std::vector<LoggedChoice> read_results_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot read results log " + path.string());
  std::vector<LoggedChoice> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(choice_from_json_line(line));
  }
  return out;
}

MatchOutcome score(const LoggedChoice& c, const Trial& t) {
  if (!t.truth_index) throw Error(Errc::MalformedTrials, "trial '" + t.id + "' has no truth attached");
  if (c.choice >= kCandidates) throw Error(Errc::InvalidRange, "choice out of range");
  // Map the presented position back to the canonical slot; slot 0 is the truth.
  const bool correct = t.permutation.empty() ? c.choice == *t.truth_index : t.permutation[c.choice] == 0;
  return {c.trial_id, c.evaluator, c.choice, correct, c.latency_ms, t.family};
}

std::vector<MatchOutcome> score_all(const std::vector<LoggedChoice>& choices, const std::vector<Trial>& trials) {
  std::map<std::string, const Trial*> index;
  for (const auto& t : trials) index[t.id] = &t;
  std::vector<MatchOutcome> out;
  out.reserve(choices.size());
  for (const auto& c : choices) {
    const auto it = index.find(c.trial_id);
    if (it == index.end()) throw Error(Errc::MalformedTrials, "results mention unknown trial '" + c.trial_id + "'");
    out.push_back(score(c, *it->second));
  }
  return out;
}

std::pair<double, double> wilson_interval(std::size_t correct, std::size_t n, double z) {
  if (n == 0) throw Error(Errc::EmptyResults, "no outcomes");
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(correct) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double centre = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  return {std::clamp(std::min(centre - half, p), 0.0, 1.0), std::clamp(std::max(centre + half, p), 0.0, 1.0)};
}

Report accuracy_report(const std::vector<MatchOutcome>& outcomes) {
  if (outcomes.empty()) throw Error(Errc::EmptyResults, "no outcomes to report");
  Report r;
  r.n = outcomes.size();
  for (const auto& o : outcomes) {
    r.correct += o.correct ? 1 : 0;
    FamilyStat& fs = r.by_family[o.family];
    ++fs.n;
    fs.correct += o.correct ? 1 : 0;
  }
  r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.n);
  std::tie(r.wilson_lo, r.wilson_hi) = wilson_interval(r.correct, r.n);
  for (auto& [name, fs] : r.by_family) fs.accuracy = static_cast<double>(fs.correct) / static_cast<double>(fs.n);
  return r;
}

std::string report_to_json(const Report& r) {
  json fam = json::object();
  for (const auto& [name, fs] : r.by_family)
    fam[name] = {{"n", fs.n}, {"correct", fs.correct}, {"accuracy", fs.accuracy}};
  return json{{"n", r.n},
              {"correct", r.correct},
              {"accuracy", r.accuracy},
              {"wilson95", {r.wilson_lo, r.wilson_hi}},
              {"by_family", fam}}
             .dump(2) +
         "\n";
}

std::string report_to_text(const Report& r) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "n         %zu\ncorrect   %zu\naccuracy  %.4f\nwilson95  [%.4f, %.4f]\n", r.n, r.correct,
                r.accuracy, r.wilson_lo, r.wilson_hi);
  out += buf;
  out += "\nfamily                 n  correct  accuracy\n";
  for (const auto& [name, fs] : r.by_family) {
    std::snprintf(buf, sizeof buf, "%-20s %4zu  %7zu  %8.4f\n", name.empty() ? "(unknown)" : name.c_str(), fs.n,
                  fs.correct, fs.accuracy);
    out += buf;
  }
  return out;
}

// --- matchers ---------------------------------------------------------------------------------------

std::size_t perceptual_choice(ImageStore& store, const Trial& t, Mode mode) {
  const auto ref = store.features(t.reference, mode);
  std::vector<std::vector<double>> cands;
  cands.reserve(t.candidates.size());
  for (const auto& id : t.candidates) cands.push_back(store.features(id, mode));
  return rank_candidates(ref, cands).front();
}

std::vector<LoggedChoice> run_eval(const std::vector<Trial>& trials, ImageStore& store, const EvalOptions& opt) {
  std::vector<LoggedChoice> out(trials.size());
  using Clock = std::chrono::steady_clock;
  auto ms_since = [](Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  };

  if (opt.matcher == Evaluator::Random) {
    Rng rng(opt.seed);
    for (std::size_t i = 0; i < trials.size(); ++i) out[i] = {trials[i].id, Evaluator::Random, rng.below(kCandidates), 0.0, {}, 0};
    return out;
  }
  if (opt.matcher != Evaluator::Perceptual && opt.matcher != Evaluator::External)
    throw Error(Errc::BadParams, "eval supports the perceptual, external and random matchers");

  // Trials are independent; workers pull the next index. Output order is
  // trial order regardless of scheduling.
  const std::size_t workers =
      std::max<std::size_t>(1, opt.matcher == Evaluator::External ? opt.judge.concurrency
                                                                  : std::min<std::size_t>(8, std::thread::hardware_concurrency()));
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= trials.size()) return;
      {
        std::lock_guard lock(err_mu);
        if (first_error) return;
      }
      try {
        const Trial& t = trials[i];
        const Mode mode = opt.mode.value_or(t.mode);
        const auto t0 = Clock::now();
        if (opt.matcher == Evaluator::Perceptual) {
          const std::size_t c = perceptual_choice(store, t, mode);
          out[i] = {t.id, Evaluator::Perceptual, c, ms_since(t0), {}, 0};
        } else {
          const auto ref = store.png(t.reference, mode);
          std::vector<std::vector<std::uint8_t>> cands;
          for (const auto& id : t.candidates) cands.push_back(store.png(id, mode));
          const JudgeResult r = judge_external(t, mode, ref, cands, opt.judge);
          out[i] = {t.id, Evaluator::External, r.choice, ms_since(t0), {}, r.retries};
        }
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t k = 1; k < std::min(workers, trials.size()); ++k) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

}  // namespace simgen::matchkit
