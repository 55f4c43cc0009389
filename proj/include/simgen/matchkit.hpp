#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "simgen/core.hpp"

namespace simgen::matchkit {

inline constexpr std::size_t kCandidates = 10;

enum class Mode { Color, Gray };
std::string mode_name(Mode m);
Mode parse_mode(const std::string& s);  // throws BadParams

/// One matching task. truth_index, permutation and family are hidden
/// fields: they never appear in the serialized trials document.
struct Trial {
  std::string id;
  std::string reference;
  std::vector<std::string> candidates;  // presentation order
  Mode mode = Mode::Color;
  std::optional<std::size_t> truth_index;
  std::vector<std::size_t> permutation;  // presented[i] = canonical[permutation[i]]; canonical[0] is the truth
  std::string family;                    // reference family
};

enum class DecoyPolicy { OtherFamilies, SameFamily };

/// Needs >= 10 families. The reference's family needs a second image with
/// the same params (InsufficientSeeds otherwise).
std::vector<Trial> assemble_trials(const Manifest& manifest, std::size_t n_trials, Mode mode, Rng& rng,
                                   DecoyPolicy policy = DecoyPolicy::OtherFamilies);

/// Structural checks: 10 pairwise distinct candidates, reference not among
/// them, hidden fields consistent when present. Throws MalformedTrials.
void validate(const Trial& t);

// --- serialization -------------------------------------------------------------

/// Blinded document: {"trials":[{id, reference, candidates, mode}]}.
std::string trials_to_json(const std::vector<Trial>& trials);
std::vector<Trial> trials_from_json(const std::string& text);  // MalformedTrials

/// {"truths":[{trial_id, truth_index, permutation, family}]}.
std::string truths_to_json(const std::vector<Trial>& trials);
/// Fills hidden fields from a truths document; MalformedTrials on mismatch.
void attach_truths(std::vector<Trial>& trials, const std::string& truths_text);

/// Presentation document for a trial: ids only, never truth.
std::string trial_view_json(const Trial& t);

// --- features and ranking --------------------------------------------------------

inline constexpr std::size_t kThumb = 64;
inline constexpr std::size_t kColorBins = 512;
inline constexpr std::size_t kGrayBins = 64;
inline constexpr std::size_t kOrientBins = 36;

/// Box-averaged 64x64 RGB thumbnail, channels as doubles.
std::vector<double> thumbnail(const RasterImage& img);

/// Color: 512-bin RGB histogram then 36 gradient-orientation bins.
/// Gray: to_gray, 64-bin luminance histogram then 36 orientation bins.
/// Each block is L1-normalized or all zero.
std::vector<double> perceptual_features(const RasterImage& img, Mode mode);

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

/// Best first. A candidate whose features equal the reference exactly comes
/// before any other; then descending cosine; ties by lower index.
std::vector<std::size_t> rank_candidates(const std::vector<double>& ref, const std::vector<std::vector<double>>& cands);

// --- images -------------------------------------------------------------------------

/// Lazily loads manifest images by id, converting to the requested mode.
class ImageStore {
 public:
  ImageStore(Manifest manifest, std::filesystem::path base_dir);

  const Manifest& manifest() const noexcept { return manifest_; }
  bool contains(const std::string& id) const noexcept { return manifest_.find(id) != nullptr; }
  RasterImage image(const std::string& id, Mode mode);
  std::vector<std::uint8_t> png(const std::string& id, Mode mode);
  std::vector<double> features(const std::string& id, Mode mode);

 private:
  Manifest manifest_;
  std::filesystem::path base_;
  std::mutex mu_;
  std::map<std::pair<std::string, Mode>, RasterImage> images_;
  std::map<std::pair<std::string, Mode>, std::vector<double>> features_;
};

// --- outcomes and reports ------------------------------------------------------------

enum class Evaluator { Perceptual, External, Human, Random };
std::string evaluator_name(Evaluator e);
Evaluator parse_evaluator(const std::string& s);

/// One line of the results log. Scoring happens at report time, so the log
/// carries no correctness.
struct LoggedChoice {
  std::string trial_id;
  Evaluator evaluator = Evaluator::Perceptual;
  std::size_t choice = 0;
  double latency_ms = 0.0;
  std::string session;  // empty outside serve
  std::size_t retries = 0;
};

std::string choice_to_json_line(const LoggedChoice& c);
LoggedChoice choice_from_json_line(const std::string& line);  // Parse
std::vector<LoggedChoice> read_results_log(const std::filesystem::path& path);

struct MatchOutcome {
  std::string trial_id;
  Evaluator evaluator = Evaluator::Perceptual;
  std::size_t choice = 0;
  bool correct = false;
  double latency_ms = 0.0;
  std::string family;
};

/// correct = (choice == truth_index); equivalently permutation[choice] == 0.
MatchOutcome score(const LoggedChoice& c, const Trial& t);

/// Joins choices with trials (which must carry truths). Unknown trial ids
/// raise MalformedTrials.
std::vector<MatchOutcome> score_all(const std::vector<LoggedChoice>& choices, const std::vector<Trial>& trials);

struct FamilyStat {
  std::size_t n = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
};

struct Report {
  std::size_t n = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
  double wilson_lo = 0.0;
  double wilson_hi = 0.0;
  std::map<std::string, FamilyStat> by_family;
};

inline constexpr double kWilsonZ = 1.959963984540054;

std::pair<double, double> wilson_interval(std::size_t correct, std::size_t n, double z = kWilsonZ);

Report accuracy_report(const std::vector<MatchOutcome>& outcomes);  // EmptyResults

std::string report_to_json(const Report& r);
std::string report_to_text(const Report& r);

// --- matchers --------------------------------------------------------------------------

std::size_t perceptual_choice(ImageStore& store, const Trial& t, Mode mode);

struct JudgeConfig {
  std::string endpoint;  // e.g. http://127.0.0.1:9000 ; requests go to <endpoint>/judge
  int timeout_ms = 30000;
  int retries = 3;
  int backoff_ms = 100;  // doubled after each failed attempt
  std::size_t concurrency = 4;
};

struct JudgeResult {
  std::size_t choice = 0;
  std::size_t retries = 0;
};

/// Wire request body for a trial; base64 PNGs, no truth.
std::string judge_request_json(const Trial& t, Mode mode, const std::vector<std::uint8_t>& reference_png,
                               const std::vector<std::vector<std::uint8_t>>& candidate_pngs);

/// Throws JudgeMalformed (bad body or out-of-range choice, never retried),
/// JudgeTimeout (last attempt timed out) or JudgeUnavailable.
JudgeResult judge_external(const Trial& t, Mode mode, const std::vector<std::uint8_t>& reference_png,
                           const std::vector<std::vector<std::uint8_t>>& candidate_pngs, const JudgeConfig& cfg);

struct EvalOptions {
  Evaluator matcher = Evaluator::Perceptual;
  std::optional<Mode> mode;  // overrides each trial's mode
  std::uint64_t seed = 0;    // random matcher
  JudgeConfig judge;
};

/// Runs the matcher over every trial, in trial order.
std::vector<LoggedChoice> run_eval(const std::vector<Trial>& trials, ImageStore& store, const EvalOptions& opt);

}  // namespace simgen::matchkit
