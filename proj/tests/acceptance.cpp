// Acceptance checks: one PASS/FAIL line per criterion, non-zero exit on any failure.
#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <mutex>
#include <numbers>
#include <numeric>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "simgen/families.hpp"
#include "simgen/matchkit.hpp"
#include "simgen/patterns.hpp"
#include "simgen/physics.hpp"
#include "simgen/urban.hpp"
#include "simgen/vegetation.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace simgen;
using Clock = std::chrono::steady_clock;

namespace {

const fs::path kCli = SIMGEN_CLI_PATH;
const fs::path kWork = fs::temp_directory_path() / "simgen_acceptance";

int cli(const std::string& args) {
  const std::string cmd = kCli.string() + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void require_cli(const std::string& args) {
  const int code = cli(args);
  if (code != 0) throw std::runtime_error("simgen " + args + " exited " + std::to_string(code));
}

fs::path fresh(const std::string& name) {
  const auto d = kWork / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string text_of(const fs::path& p) {
  const auto bytes = read_file(p);
  return {bytes.begin(), bytes.end()};
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double total(const Grid2D& g) { return std::accumulate(g.values().begin(), g.values().end(), 0.0); }

// Collects failure reasons for one criterion.
struct Check {
  std::vector<std::string> failures;
  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
};

int g_failed = 0;

void criterion(const std::string& name, const std::function<std::string(Check&)>& body) {
  Check c;
  std::string detail;
  const auto t0 = Clock::now();
  try {
    detail = body(c);
  } catch (const std::exception& e) {
    c.failures.push_back(std::string("exception: ") + e.what());
  }
  std::ostringstream line;
  line << (c.failures.empty() ? "PASS " : "FAIL ") << name << " (" << std::fixed;
  line.precision(1);
  line << seconds_since(t0) << " s)";
  if (!detail.empty()) line << " " << detail;
  for (const auto& f : c.failures) line << " | " << f;
  std::cout << line.str() << std::endl;
  if (!c.failures.empty()) ++g_failed;
}

// gallery -> trials -> eval -> report, all through the CLI.
struct Pipeline {
  fs::path dir, manifest, trials, truths;
};

Pipeline make_trials(const std::string& name, const std::string& gallery_args, std::size_t n, std::uint64_t seed) {
  Pipeline p;
  p.dir = fresh(name);
  require_cli("gallery " + gallery_args + " --out " + (p.dir / "gallery").string());
  p.manifest = p.dir / "gallery" / "manifest.json";
  p.trials = p.dir / "trials.json";
  p.truths = p.dir / "truths.json";
  require_cli("trials --manifest " + p.manifest.string() + " -n " + std::to_string(n) + " --seed " +
              std::to_string(seed) + " --out " + p.trials.string() + " --truths " + p.truths.string());
  return p;
}

json eval_and_report(const Pipeline& p, const std::string& matcher, const std::string& mode, const std::string& tag) {
  const auto results = p.dir / ("results_" + tag + ".ndjson");
  const auto report = p.dir / ("report_" + tag + ".json");
  fs::remove(results);
  std::string args = "eval --trials " + p.trials.string() + " --matcher " + matcher + " --results " + results.string();
  if (matcher != "random") args += " --manifest " + p.manifest.string();
  if (!mode.empty()) args += " --mode " + mode;
  if (matcher == "random") args += " --seed 17";
  require_cli(args);
  require_cli("report --trials " + p.trials.string() + " --truths " + p.truths.string() + " --results " +
              results.string() + " --json " + report.string());
  return json::parse(text_of(report));
}

// --- judge stub ---------------------------------------------------------------------

class StubJudge {
 public:
  using Handler = std::function<void(int, httplib::Response&)>;
  explicit StubJudge(Handler h) : handler_(std::move(h)) {
    server_.Post("/judge", [this](const httplib::Request& req, httplib::Response& res) {
      int attempt = 0;
      {
        std::lock_guard lock(mu_);
        attempt = hits_++;
        leaked_ = leaked_ || req.body.find("truth") != std::string::npos;
      }
      handler_(attempt, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubJudge() {
    server_.stop();
    thread_.join();
  }
  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }
  int hits() {
    std::lock_guard lock(mu_);
    return hits_;
  }
  bool leaked() {
    std::lock_guard lock(mu_);
    return leaked_;
  }

 private:
  Handler handler_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::mutex mu_;
  int hits_ = 0;
  bool leaked_ = false;
};

int free_port() {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  ::close(fd);
  return ntohs(addr.sin_port);
}

std::optional<Errc> judge_error(const matchkit::JudgeConfig& cfg, matchkit::JudgeResult* out = nullptr) {
  matchkit::Trial t;
  t.id = "t000000";
  t.reference = "r";
  for (int i = 0; i < 10; ++i) t.candidates.push_back("c" + std::to_string(i));
  t.truth_index = 3;
  const std::vector<std::uint8_t> ref = {1, 2, 3};
  const std::vector<std::vector<std::uint8_t>> cands(10, ref);
  try {
    const auto r = matchkit::judge_external(t, matchkit::Mode::Color, ref, cands, cfg);
    if (out) *out = r;
    return std::nullopt;
  } catch (const Error& e) {
    return e.code();
  }
}

}  // namespace

int main() {
  fs::create_directories(kWork);

  criterion("random-baseline: 10^4 trials at 0.10 +- 0.01 in under 60 s", [](Check& c) {
    const auto t0 = Clock::now();
    const auto p = make_trials("random", "--per-family 2 --width 16 --height 16", 10000, 1);
    const auto r = eval_and_report(p, "random", "", "random");
    const double acc = r["accuracy"].get<double>();
    const double secs = seconds_since(t0);
    c.expect(r["n"] == 10000, "n != 10000");
    c.expect(std::abs(acc - 0.10) <= 0.01, "accuracy out of band");
    c.expect(secs < 60.0, "too slow");
    return "accuracy=" + std::to_string(acc);
  });

  criterion("perceptual ceiling: byte-identical truth scores 100% exactly", [](Check& c) {
    const auto dir = fresh("ceiling");
    fs::create_directories(dir / "images");
    Manifest m;
    for (const auto& fam : families::registry()) {
      ParamMap small;
      if (fam.name == "reaction_diffusion") small["steps"] = 300.0;
      if (fam.name == "erosion") small["steps"] = 30.0;
      const GeneratorSpec spec{fam.name, families::resolve_params(fam, small), 7};
      const auto path = "images/" + fam.name + ".png";
      save_image(families::generate(spec, 48, 48), dir / path);
      // Two entries with distinct seeds share one file, so the true candidate equals the reference.
      for (std::uint64_t s : {7u, 8u}) m.images.push_back({fam.name + std::to_string(s), fam.name, s, spec.params, path, ""});
    }
    Rng rng(3);
    const auto trials = matchkit::assemble_trials(m, 300, matchkit::Mode::Color, rng);
    matchkit::ImageStore store(m, dir);
    std::string detail;
    for (auto mode : {matchkit::Mode::Color, matchkit::Mode::Gray}) {
      matchkit::EvalOptions opt;
      opt.mode = mode;
      const auto rep = matchkit::accuracy_report(matchkit::score_all(matchkit::run_eval(trials, store, opt), trials));
      c.expect(rep.correct == rep.n, matchkit::mode_name(mode) + " below 100%");
      detail += matchkit::mode_name(mode) + "=" + std::to_string(rep.correct) + "/" + std::to_string(rep.n) + " ";
    }
    return detail;
  });

  Pipeline builtin;
  json builtin_color;
  criterion("perceptual above chance: 12 families x 2 seeds, 500 trials, color >= 0.40, gray >= 0.30",
            [&](Check& c) {
              builtin = make_trials("builtin", "--per-family 2 --seed 0", 500, 0);
              builtin_color = eval_and_report(builtin, "perceptual", "color", "color");
              const auto gray = eval_and_report(builtin, "perceptual", "gray", "gray");
              const double ca = builtin_color["accuracy"].get<double>();
              const double ga = gray["accuracy"].get<double>();
              c.expect(json::parse(text_of(builtin.manifest))["images"].size() == 24, "gallery size");
              c.expect(ca >= 0.40, "color below 0.40");
              c.expect(ga >= 0.30, "gray below 0.30");
              return "color=" + std::to_string(ca) + " gray=" + std::to_string(ga);
            });

  criterion("physics invariants: erosion, flame diffusion, Boltzmann chi-square, refraction", [](Check& c) {
    const auto t0 = Clock::now();
    Rng rng(2024);
    auto field = [&](std::size_t w, std::size_t h, double lo, double hi) {
      Grid2D g(w, h);
      for (auto& v : g.values()) v = rng.uniform(lo, hi);
      return g;
    };

    physics::ErosionState s{field(64, 64, 0.0, 10.0), field(64, 64, 0.0, 0.2), Grid2D(64, 64, 0.0)};
    const double mass0 = total(s.height) + total(s.sediment);
    double worst = 0.0;
    for (int step = 0; step < 500; ++step) {
      physics::ErosionParams p;
      p.rain = rng.uniform(0.0, 0.05);
      p.capacity = rng.uniform(0.1, 2.0);
      p.dissolve = rng.uniform(0.05, 1.0);
      p.deposit = rng.uniform(0.05, 1.0);
      p.evaporation = rng.uniform(0.0, 0.5);
      s = physics::erosion_step(s, p, rng);
      worst = std::max(worst, std::abs(total(s.height) + total(s.sediment) - mass0) / mass0);
    }
    c.expect(worst <= 1e-9, "erosion drift " + std::to_string(worst));

    physics::FlameParams f;
    f.temperature = field(64, 48, 0.0, 5.0);
    f.obstacles = Mask(64, 48, 0);
    f.inject_rate = 0.0;
    f.buoyancy = 0.0;
    f.jitter = 0.0;
    f.kappa = 0.0;
    f.alpha = 0.2;
    const double heat0 = total(f.temperature);
    for (int step = 0; step < 200; ++step) f = physics::flame_step(f, rng);
    const double heat_drift = std::abs(total(f.temperature) - heat0) / heat0;
    c.expect(heat_drift <= 1e-9, "flame drift");

    const auto g = field(8, 8, -1.0, 1.0);
    const double beta = 2.5;
    std::vector<double> pmf(64);
    double z = 0.0;
    for (std::size_t i = 0; i < 64; ++i) z += pmf[i] = std::exp(-beta * std::abs(g[i]));
    const std::size_t n = 1000000;
    std::vector<double> counts(64, 0.0);
    for (const auto& pt : physics::boltzmann_particles(g, beta, n, rng))
      counts[static_cast<std::size_t>(pt.y) * 8 + static_cast<std::size_t>(pt.x)] += 1.0;
    double stat = 0.0;
    for (std::size_t i = 0; i < 64; ++i) {
      const double e = pmf[i] / z * static_cast<double>(n);
      stat += (counts[i] - e) * (counts[i] - e) / e;
    }
    const double pval = boost::math::cdf(boost::math::complement(boost::math::chi_squared(63), stat));
    c.expect(pval > 0.001, "boltzmann p-value");

    constexpr double kPi = std::numbers::pi;
    const double t1 = 30.0 * kPi / 180.0;
    const physics::Vec3 d{std::sin(t1), 0.0, -std::cos(t1)};
    const physics::Vec3 up{0.0, 0.0, 1.0};
    const auto t = physics::refract(d, up, 1.0, 1.33);
    c.expect(t.has_value(), "refract returned TIR");
    if (t) {
      const double t2 = std::asin(std::hypot(t->x, t->y));
      c.expect(std::abs(t2 - std::asin(std::sin(t1) / 1.33)) <= 1e-6, "snell angle");
      c.expect(std::abs(t2 * 180.0 / kPi - 22.082) <= 1e-3, "22.082 degrees");
      const auto back = physics::refract(*t, -up, 1.33, 1.0);
      c.expect(back && physics::norm(*back - d) <= 1e-9, "round trip");
    }
    c.expect(seconds_since(t0) < 120.0, "too slow");
    char buf[96];
    std::snprintf(buf, sizeof buf, "erosion_drift=%.2e flame_drift=%.2e boltzmann_p=%.4f", worst, heat_drift, pval);
    return std::string(buf);
  });

  criterion("oracle equivalence: voronoi, algae lengths, gray-scott fixed point, land mask counts", [](Check& c) {
    Rng rng(77);
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<std::pair<double, double>> seeds;
      const std::size_t n = 1 + rng.below(16);
      for (std::size_t i = 0; i < n; ++i) seeds.emplace_back(rng.uniform(0, 64), rng.uniform(0, 64));
      const auto v = patterns::voronoi_shaded(seeds, {0.0, 3.0, 24.0}, 64, 64, 1);
      for (std::size_t y = 0; y < 64; ++y)
        for (std::size_t x = 0; x < 64; ++x) {
          std::size_t best = 0;
          double bd = std::numeric_limits<double>::infinity();
          for (std::size_t i = 0; i < n; ++i) {
            const double dd = std::hypot(x + 0.5 - seeds[i].first, y + 0.5 - seeds[i].second);
            if (dd < bd) {
              bd = dd;
              best = i;
            }
          }
          if (v.owner[y * 64 + x] != best) {
            c.expect(false, "voronoi owner mismatch");
            trial = 10;
            y = 64;
            break;
          }
        }
    }

    const auto algae = vegetation::parse_lsystem("axiom: A\nA -> AB\nB -> A");
    const std::size_t expected[] = {1, 2, 3, 5, 8};
    for (int g = 0; g <= 4; ++g)
      c.expect(vegetation::expand(algae, g, rng).size() == expected[g], "algae length n=" + std::to_string(g));

    vegetation::GrayScottParams gs;
    gs.steps = 200;
    const auto out = vegetation::gray_scott(Grid2D(32, 32, 1.0), Grid2D(32, 32, 0.0), gs);
    for (double u : out.u.values()) c.expect(u == 1.0, "gray-scott u moved");
    for (double v : out.v.values()) c.expect(v == 0.0, "gray-scott v moved");

    for (double q : {0.0, 0.25, 0.5, 1.0}) {
      const auto m = urban::land_mask(97, 61, q, 5);
      const auto water = static_cast<std::size_t>(std::count(m.values().begin(), m.values().end(), std::uint8_t{0}));
      c.expect(water == static_cast<std::size_t>(std::floor(q * 97 * 61)), "land mask q=" + std::to_string(q));
    }
    if (c.failures.size() > 8) c.failures.resize(8);
    return std::string();
  });

  criterion("determinism: gallery, trials and report hashes match across two runs", [&](Check& c) {
    if (builtin.dir.empty()) throw std::runtime_error("reference pipeline did not run");
    const auto again = make_trials("builtin_again", "--per-family 2 --seed 0", 500, 0);
    eval_and_report(again, "perceptual", "color", "color");
    auto hash = [](const fs::path& p) { return sha256_hex(read_file(p)); };
    c.expect(hash(builtin.manifest) == hash(again.manifest), "manifest differs");
    c.expect(hash(builtin.trials) == hash(again.trials), "trials differ");
    c.expect(hash(builtin.truths) == hash(again.truths), "truths differ");
    c.expect(hash(builtin.dir / "report_color.json") == hash(again.dir / "report_color.json"), "report differs");
    return "manifest=" + hash(builtin.manifest).substr(0, 16) + " trials=" + hash(builtin.trials).substr(0, 16) +
           " report=" + hash(builtin.dir / "report_color.json").substr(0, 16);
  });

  criterion("judge protocol: always-0, out-of-range, timeout-then-answer, unreachable", [&](Check& c) {
    matchkit::JudgeConfig cfg;
    cfg.timeout_ms = 300;
    cfg.retries = 3;
    cfg.backoff_ms = 5;

    {
      StubJudge zero([](int, httplib::Response& res) { res.set_content(R"({"choice":0})", "application/json"); });
      const auto p = make_trials("judge", "--per-family 2 --width 16 --height 16", 20, 9);
      const auto results = p.dir / "judge.ndjson";
      const int code = cli("eval --trials " + p.trials.string() + " --manifest " + p.manifest.string() +
                           " --matcher external --endpoint " + zero.endpoint() + " --results " + results.string());
      c.expect(code == 0, "always-0 eval exit " + std::to_string(code));
      if (code == 0) {
        const auto log = matchkit::read_results_log(results);
        c.expect(log.size() == 20, "always-0 log size");
        for (const auto& l : log) c.expect(l.choice == 0 && l.retries == 0, "always-0 choice/retries");
        if (c.failures.size() > 4) c.failures.resize(4);
      }
      c.expect(zero.hits() == 20, "always-0 request count");
      c.expect(!zero.leaked(), "request carried truth");
    }
    {
      StubJudge eleven([](int, httplib::Response& res) { res.set_content(R"({"choice":11})", "application/json"); });
      cfg.endpoint = eleven.endpoint();
      c.expect(judge_error(cfg) == Errc::JudgeMalformed, "out-of-range not JudgeMalformed");
      c.expect(eleven.hits() == 1, "out-of-range was retried");
    }
    {
      StubJudge flaky([](int attempt, httplib::Response& res) {
        if (attempt < 2) std::this_thread::sleep_for(std::chrono::milliseconds(700));
        res.set_content(R"({"choice":5})", "application/json");
      });
      cfg.endpoint = flaky.endpoint();
      matchkit::JudgeResult r;
      c.expect(!judge_error(cfg, &r).has_value(), "timeout-then-answer failed");
      c.expect(r.choice == 5 && r.retries == 2, "timeout-then-answer retries " + std::to_string(r.retries));
    }
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(free_port());
    c.expect(judge_error(cfg) == Errc::JudgeUnavailable, "unreachable not JudgeUnavailable");
    const auto p = kWork / "judge";
    const int code = cli("eval --trials " + (p / "trials.json").string() + " --manifest " +
                         (p / "gallery" / "manifest.json").string() + " --matcher external --retries 0 --endpoint " +
                         cfg.endpoint + " --results " + (p / "none.ndjson").string());
    c.expect(code == 6, "unreachable CLI exit " + std::to_string(code));
    return std::string();
  });

  return g_failed == 0 ? 0 : 1;
}
