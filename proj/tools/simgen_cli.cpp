// simgen command-line tool: generators, galleries and the matching harness.
#include <sys/stat.h>

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "simgen/families.hpp"
#include "simgen/matchkit.hpp"
#include "simgen/server.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace simgen;

namespace {

enum Exit : int {
  kOk = 0,
  kFailure = 1,
  kUnknownFamily = 2,
  kInvalidParams = 3,
  kUnwritable = 4,
  kMalformedTrials = 5,
  kJudgeUnreachable = 6,
  kEmptyResults = 7,
  kPortBusy = 8,
};

int exit_code_for(Errc c) {
  switch (c) {
    case Errc::UnknownFamily: return kUnknownFamily;
    case Errc::BadParams:
    case Errc::BadPalette:
    case Errc::InvalidRange:
    case Errc::DegenerateMode:
    case Errc::NotUnit:
    case Errc::Unstable:
    case Errc::BadModel:
    case Errc::GlyphTooLarge:
    case Errc::WordTooLong:
    case Errc::InsufficientFamilies:
    case Errc::InsufficientSeeds:
      return kInvalidParams;
    case Errc::Io: return kUnwritable;
    case Errc::MalformedTrials: return kMalformedTrials;
    case Errc::JudgeTimeout:
    case Errc::JudgeUnavailable:
    case Errc::JudgeMalformed:
      return kJudgeUnreachable;
    case Errc::EmptyResults: return kEmptyResults;
    case Errc::PortBusy: return kPortBusy;
    default: return kFailure;
  }
}

/// Raised for missing or unreadable inputs so they do not look like an
/// unwritable output directory.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw InputError("cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct Config {
  std::string output_dir = "out";
  std::size_t width = 256;
  std::size_t height = 256;
  std::uint64_t seed = 0;
  matchkit::JudgeConfig judge;
  std::vector<std::string> families;
};

void load_config(const fs::path& path, Config& c) {
  json j;
  try {
    j = json::parse(slurp(path));
    c.output_dir = j.value("output_dir", c.output_dir);
    c.width = j.value("width", c.width);
    c.height = j.value("height", c.height);
    c.seed = j.value("seed", c.seed);
    if (j.contains("judge")) {
      const json& jj = j["judge"];
      c.judge.endpoint = jj.value("endpoint", c.judge.endpoint);
      c.judge.timeout_ms = jj.value("timeout_ms", c.judge.timeout_ms);
      c.judge.retries = jj.value("retries", c.judge.retries);
      c.judge.concurrency = jj.value("concurrency", c.judge.concurrency);
    }
    c.families = j.value("families", c.families);
  } catch (const json::exception& e) {
    throw Error(Errc::BadParams, "config " + path.string() + ": " + e.what());
  }
}

void check_config(const Config& c) {
  if (c.width < families::kMinSide || c.height < families::kMinSide)
    throw Error(Errc::BadParams, "config dims must be at least 16x16");
  if (c.judge.concurrency < 1) throw Error(Errc::BadParams, "judge concurrency must be >= 1");
  for (const auto& f : c.families) families::find_family(f);
}

/// --set key=value: JSON literal when it parses (numbers, lists), else text.
ParamValue parse_value(const std::string& raw) {
  try {
    const json j = json::parse(raw);
    if (j.is_number()) return j.get<double>();
    if (j.is_array()) return j.get<std::vector<double>>();
    if (j.is_string()) return j.get<std::string>();
  } catch (const json::exception&) {
  }
  return raw;
}

ParamMap params_from_file(const fs::path& p) {
  const std::string text = slurp(p);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(Errc::BadParams, "params file: " + std::string(e.what()));
  }
  const json& obj = j.contains("params") && j.contains("family") ? j["params"] : j;
  if (!obj.is_object()) throw Error(Errc::BadParams, "params file must hold a JSON object");
  ParamMap out;
  for (const auto& [k, v] : obj.items()) {
    if (v.is_number()) out[k] = v.get<double>();
    else if (v.is_string()) out[k] = v.get<std::string>();
    else if (v.is_array()) {
      try {
        out[k] = v.get<std::vector<double>>();
      } catch (const json::exception&) {
        throw Error(Errc::BadParams, "parameter '" + k + "' must be a list of numbers");
      }
    } else {
      throw Error(Errc::BadParams, "parameter '" + k + "' has an unsupported type");
    }
  }
  return out;
}

void ensure_parent(const fs::path& file) {
  const fs::path dir = file.parent_path();
  if (dir.empty()) return;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::Io, "cannot create directory " + dir.string() + ": " + ec.message());
}

fs::path manifest_dir(const fs::path& manifest) {
  const fs::path d = manifest.parent_path();
  return d.empty() ? fs::path(".") : d;
}

std::vector<matchkit::Trial> load_trials(const fs::path& p) { return matchkit::trials_from_json(slurp(p)); }

// --- commands ------------------------------------------------------------------

struct GenerateArgs {
  std::string family;
  std::string params_file;
  std::vector<std::string> sets;
  std::string out;
};

int cmd_generate(const GenerateArgs& a, const Config& cfg) {
  GeneratorSpec spec;
  spec.family = a.family;
  const families::Family& fam = families::find_family(a.family);
  if (!a.params_file.empty()) spec.params = params_from_file(a.params_file);
  for (const auto& kv : a.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw Error(Errc::BadParams, "--set expects key=value, got '" + kv + "'");
    spec.params[kv.substr(0, eq)] = parse_value(kv.substr(eq + 1));
  }
  spec.params = families::resolve_params(fam, spec.params);
  spec.seed = cfg.seed;
  const RasterImage img = families::generate(spec, cfg.width, cfg.height);

  fs::path out = a.out.empty() ? fs::path(cfg.output_dir) / (a.family + "_" + std::to_string(cfg.seed) + ".png")
                               : fs::path(a.out);
  ensure_parent(out);
  save_image(img, out);
  json side = json::parse(spec_to_json(spec));
  side["width"] = cfg.width;
  side["height"] = cfg.height;
  fs::path sidecar = out;
  sidecar.replace_extension(".json");
  write_text(sidecar, side.dump(2) + "\n");
  std::cout << out.string() << "\n";
  return kOk;
}

struct GalleryArgs {
  std::size_t per_family = 2;
  std::size_t threads = 0;
};

int cmd_gallery(const GalleryArgs& a, const Config& cfg) {
  families::GalleryOptions opt;
  opt.out_dir = cfg.output_dir;
  opt.per_family = a.per_family;
  opt.seed = cfg.seed;
  opt.width = cfg.width;
  opt.height = cfg.height;
  opt.families = cfg.families;
  opt.threads = a.threads;
  const Manifest m = families::build_gallery(opt);
  std::cerr << "wrote " << m.images.size() << " images\n";
  std::cout << (fs::path(cfg.output_dir) / "manifest.json").string() << "\n";
  return kOk;
}

struct TrialsArgs {
  std::string manifest;
  std::size_t n = 500;
  std::string mode = "color";
  std::string out = "trials.json";
  std::string truths = "truths.json";
  std::string decoys = "other";
};

int cmd_trials(const TrialsArgs& a, const Config& cfg) {
  const Manifest m = manifest_from_json(slurp(a.manifest));
  Rng rng(cfg.seed);
  const auto policy = a.decoys == "same" ? matchkit::DecoyPolicy::SameFamily : matchkit::DecoyPolicy::OtherFamilies;
  const auto trials = matchkit::assemble_trials(m, a.n, matchkit::parse_mode(a.mode), rng, policy);
  ensure_parent(a.out);
  ensure_parent(a.truths);
  write_text(a.out, matchkit::trials_to_json(trials));
  // The truths file is created private before any content is written.
  {
    std::ofstream touch(a.truths, std::ios::trunc);
    if (!touch) throw Error(Errc::Io, "cannot write " + a.truths);
  }
  fs::permissions(a.truths, fs::perms::owner_read | fs::perms::owner_write, fs::perm_options::replace);
  write_text(a.truths, matchkit::truths_to_json(trials));
  std::cerr << "wrote " << trials.size() << " trials\n";
  return kOk;
}

struct EvalArgs {
  std::string trials;
  std::string manifest;
  std::string matcher = "perceptual";
  std::string mode;
  std::string results = "results.ndjson";
};

int cmd_eval(const EvalArgs& a, const Config& cfg) {
  std::vector<matchkit::Trial> trials;
  try {
    trials = load_trials(a.trials);
  } catch (const InputError& e) {
    throw Error(Errc::MalformedTrials, e.what());
  }
  matchkit::EvalOptions opt;
  opt.matcher = matchkit::parse_evaluator(a.matcher);
  if (!a.mode.empty()) opt.mode = matchkit::parse_mode(a.mode);
  opt.seed = cfg.seed;
  opt.judge = cfg.judge;

  Manifest m;
  fs::path base = ".";
  if (opt.matcher != matchkit::Evaluator::Random) {
    if (a.manifest.empty()) throw Error(Errc::BadParams, "--manifest is required for this matcher");
    m = manifest_from_json(slurp(a.manifest));
    base = manifest_dir(a.manifest);
  }
  matchkit::ImageStore store(std::move(m), base);
  const auto choices = matchkit::run_eval(trials, store, opt);

  ensure_parent(a.results);
  std::ofstream out(a.results, std::ios::app);
  if (!out) throw Error(Errc::Io, "cannot append to " + a.results);
  for (const auto& c : choices) out << matchkit::choice_to_json_line(c) << '\n';
  std::cerr << "recorded " << choices.size() << " outcomes\n";
  return kOk;
}

struct ReportArgs {
  std::string trials;
  std::string truths;
  std::string results = "results.ndjson";
  std::string evaluator;
  std::string session;
  std::string json_out;
};

int cmd_report(const ReportArgs& a) {
  std::vector<matchkit::Trial> trials;
  try {
    trials = load_trials(a.trials);
    matchkit::attach_truths(trials, slurp(a.truths));
  } catch (const InputError& e) {
    throw Error(Errc::MalformedTrials, e.what());
  }
  std::vector<matchkit::LoggedChoice> log;
  if (fs::exists(a.results)) log = matchkit::read_results_log(a.results);
  std::vector<matchkit::LoggedChoice> picked;
  for (const auto& c : log) {
    if (!a.evaluator.empty() && matchkit::evaluator_name(c.evaluator) != a.evaluator) continue;
    if (!a.session.empty() && c.session != a.session) continue;
    picked.push_back(c);
  }
  const auto report = matchkit::accuracy_report(matchkit::score_all(picked, trials));
  std::cout << matchkit::report_to_text(report);
  if (!a.json_out.empty()) {
    ensure_parent(a.json_out);
    write_text(a.json_out, matchkit::report_to_json(report));
  }
  return kOk;
}

struct ServeArgs {
  std::string trials;
  std::string manifest;
  std::string results = "results.ndjson";
  std::string truths;
  std::string static_dir;
  std::string host = "127.0.0.1";
  int port = 8765;
};

server::MatcherServer* g_server = nullptr;

extern "C" void on_signal(int) {
  if (g_server) g_server->stop();
}

int cmd_serve(const ServeArgs& a) {
  server::ServeOptions opt;
  try {
    opt.trials = load_trials(a.trials);
  } catch (const InputError& e) {
    throw Error(Errc::MalformedTrials, e.what());
  }
  opt.results_log = a.results;
  if (!a.truths.empty()) opt.truths_path = fs::path(a.truths);
  if (!a.static_dir.empty()) opt.static_dir = fs::path(a.static_dir);
  opt.host = a.host;
  auto store = std::make_shared<matchkit::ImageStore>(manifest_from_json(slurp(a.manifest)), manifest_dir(a.manifest));
  server::MatcherServer srv(std::move(opt), store);
  const int port = srv.bind(a.port);
  g_server = &srv;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cerr << "serving on http://" << a.host << ":" << port << "\n";
  std::cout << port << std::endl;
  srv.run();
  g_server = nullptr;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Procedural image generators and an image-matching evaluation harness"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file; flags override its values");

  Config cfg;
  std::optional<std::string> out_dir;
  std::optional<std::size_t> width, height;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> endpoint;
  std::optional<int> timeout_ms, retries;
  std::optional<std::size_t> concurrency;
  std::vector<std::string> fam_filter;

  auto add_dims = [&](CLI::App* sub) {
    sub->add_option("--width", width, "image width");
    sub->add_option("--height", height, "image height");
  };

  GenerateArgs gen;
  auto* s_gen = app.add_subcommand("generate", "render one image and its spec sidecar");
  s_gen->add_option("family", gen.family, "generator family")->required();
  s_gen->add_option("--params", gen.params_file, "JSON params file");
  s_gen->add_option("--set", gen.sets, "parameter override key=value (repeatable)");
  s_gen->add_option("--seed", seed, "seed");
  s_gen->add_option("--out", gen.out, "output PNG path");
  s_gen->add_option("--output-dir", out_dir, "directory used when --out is absent");
  add_dims(s_gen);

  GalleryArgs gal;
  auto* s_gal = app.add_subcommand("gallery", "render per-family images and a manifest");
  s_gal->add_option("--per-family", gal.per_family, "images per family")->check(CLI::PositiveNumber);
  s_gal->add_option("--seed", seed, "base seed; image i uses seed+i");
  s_gal->add_option("--out", out_dir, "output directory");
  s_gal->add_option("--families", fam_filter, "restrict to these families")->delimiter(',');
  s_gal->add_option("--threads", gal.threads, "worker threads (0 = all cores)");
  add_dims(s_gal);

  TrialsArgs tri;
  auto* s_tri = app.add_subcommand("trials", "assemble blinded matching trials from a manifest");
  s_tri->add_option("--manifest", tri.manifest, "gallery manifest")->required();
  s_tri->add_option("-n,--count", tri.n, "number of trials");
  s_tri->add_option("--mode", tri.mode, "color or gray")->check(CLI::IsMember({"color", "gray"}));
  s_tri->add_option("--seed", seed, "assembly seed");
  s_tri->add_option("--out", tri.out, "trials file");
  s_tri->add_option("--truths", tri.truths, "truths file (written with 0600 permissions)");
  s_tri->add_option("--decoys", tri.decoys, "other: decoys from other families; same: same family")
      ->check(CLI::IsMember({"other", "same"}));

  EvalArgs ev;
  auto* s_ev = app.add_subcommand("eval", "run a matcher over trials and append outcomes");
  s_ev->add_option("--trials", ev.trials, "trials file")->required();
  s_ev->add_option("--manifest", ev.manifest, "gallery manifest");
  s_ev->add_option("--matcher", ev.matcher, "perceptual, random or external")
      ->check(CLI::IsMember({"perceptual", "random", "external"}));
  s_ev->add_option("--mode", ev.mode, "override each trial's mode")->check(CLI::IsMember({"color", "gray"}));
  s_ev->add_option("--results", ev.results, "results log (appended)");
  s_ev->add_option("--seed", seed, "seed for the random matcher");
  s_ev->add_option("--endpoint", endpoint, "judge base URL");
  s_ev->add_option("--timeout-ms", timeout_ms, "judge timeout per attempt");
  s_ev->add_option("--retries", retries, "judge retries after the first attempt");
  s_ev->add_option("--concurrency", concurrency, "judge requests in flight");

  ReportArgs rep;
  auto* s_rep = app.add_subcommand("report", "score a results log against the truths");
  s_rep->add_option("--trials", rep.trials, "trials file")->required();
  s_rep->add_option("--truths", rep.truths, "truths file")->required();
  s_rep->add_option("--results", rep.results, "results log");
  s_rep->add_option("--evaluator", rep.evaluator, "only outcomes from this evaluator");
  s_rep->add_option("--session", rep.session, "only outcomes from this serve session");
  s_rep->add_option("--json", rep.json_out, "also write the report as JSON");

  ServeArgs srv;
  auto* s_srv = app.add_subcommand("serve", "HTTP API and page for human matching sessions");
  s_srv->add_option("--trials", srv.trials, "trials file")->required();
  s_srv->add_option("--manifest", srv.manifest, "gallery manifest")->required();
  s_srv->add_option("--results", srv.results, "results log (appended)");
  s_srv->add_option("--truths", srv.truths, "enables the post-session report route");
  s_srv->add_option("--static", srv.static_dir, "directory with UI assets");
  s_srv->add_option("--host", srv.host, "bind address");
  s_srv->add_option("--port", srv.port, "port (0 picks a free one)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (!config_path.empty()) load_config(config_path, cfg);
    if (out_dir) cfg.output_dir = *out_dir;
    if (width) cfg.width = *width;
    if (height) cfg.height = *height;
    if (seed) cfg.seed = *seed;
    if (endpoint) cfg.judge.endpoint = *endpoint;
    if (timeout_ms) cfg.judge.timeout_ms = *timeout_ms;
    if (retries) cfg.judge.retries = *retries;
    if (concurrency) cfg.judge.concurrency = *concurrency;
    if (!fam_filter.empty()) cfg.families = fam_filter;
    check_config(cfg);

    if (s_gen->parsed()) return cmd_generate(gen, cfg);
    if (s_gal->parsed()) return cmd_gallery(gal, cfg);
    if (s_tri->parsed()) return cmd_trials(tri, cfg);
    if (s_ev->parsed()) return cmd_eval(ev, cfg);
    if (s_rep->parsed()) return cmd_report(rep);
    if (s_srv->parsed()) return cmd_serve(srv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
