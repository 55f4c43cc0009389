// External judge client. Kept apart from matchkit.cpp so only this unit and
// the server pull in the HTTP header.
#include <chrono>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "simgen/matchkit.hpp"

namespace simgen::matchkit {

using nlohmann::json;

std::string judge_request_json(const Trial& t, Mode mode, const std::vector<std::uint8_t>& reference_png,
                               const std::vector<std::vector<std::uint8_t>>& candidate_pngs) {
  json cands = json::array();
  for (const auto& png : candidate_pngs) cands.push_back(base64_encode(png));
  return json{{"trial_id", t.id}, {"mode", mode_name(mode)}, {"reference", base64_encode(reference_png)},
              {"candidates", cands}}
      .dump();
}

namespace {

struct Endpoint {
  std::string base;  // scheme://host:port
  std::string path;
};

Endpoint split_endpoint(const std::string& url) {
  const auto scheme = url.find("://");
  const std::size_t host_start = scheme == std::string::npos ? 0 : scheme + 3;
  const auto slash = url.find('/', host_start);
  Endpoint e{slash == std::string::npos ? url : url.substr(0, slash),
             slash == std::string::npos ? std::string() : url.substr(slash)};
  while (!e.path.empty() && e.path.back() == '/') e.path.pop_back();
  if (e.path.size() < 6 || e.path.compare(e.path.size() - 6, 6, "/judge") != 0) e.path += "/judge";
  return e;
}

bool is_timeout(httplib::Error err) {
  return err == httplib::Error::Read || err == httplib::Error::Write || err == httplib::Error::ConnectionTimeout;
}

}  // namespace

JudgeResult judge_external(const Trial& t, Mode mode, const std::vector<std::uint8_t>& reference_png,
                           const std::vector<std::vector<std::uint8_t>>& candidate_pngs, const JudgeConfig& cfg) {
  if (candidate_pngs.size() != kCandidates) throw Error(Errc::InvalidRange, "judge needs exactly 10 candidates");
  if (cfg.endpoint.empty()) throw Error(Errc::JudgeUnavailable, "no judge endpoint configured");
  const Endpoint ep = split_endpoint(cfg.endpoint);
  const std::string body = judge_request_json(t, mode, reference_png, candidate_pngs);

  const int attempts = 1 + std::max(0, cfg.retries);
  bool last_timed_out = false;
  std::string last_reason;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) {
      const auto wait = static_cast<long long>(cfg.backoff_ms) << std::min(attempt - 1, 16);
      std::this_thread::sleep_for(std::chrono::milliseconds(wait));
    }
    httplib::Client cli(ep.base);
    const auto tmo = std::chrono::milliseconds(std::max(1, cfg.timeout_ms));
    cli.set_connection_timeout(tmo);
    cli.set_read_timeout(tmo);
    cli.set_write_timeout(tmo);
    const auto res = cli.Post(ep.path, body, "application/json");
    if (!res) {
      last_timed_out = is_timeout(res.error());
      last_reason = httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500 || res->status == 429) {
      last_timed_out = false;
      last_reason = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) throw Error(Errc::JudgeMalformed, "judge answered HTTP " + std::to_string(res->status));
    json doc;
    try {
      doc = json::parse(res->body);
    } catch (const json::exception&) {
      throw Error(Errc::JudgeMalformed, "judge response is not JSON");
    }
    if (!doc.is_object() || !doc.contains("choice") || !doc["choice"].is_number_integer())
      throw Error(Errc::JudgeMalformed, "judge response lacks an integer 'choice'");
    const auto choice = doc["choice"].get<long long>();
    if (choice < 0 || choice >= static_cast<long long>(kCandidates))
      throw Error(Errc::JudgeMalformed, "judge choice " + std::to_string(choice) + " is outside 0..9");
    return {static_cast<std::size_t>(choice), static_cast<std::size_t>(attempt)};
  }
  const std::string msg = "judge at " + cfg.endpoint + " failed after " + std::to_string(attempts) +
                          " attempts (" + last_reason + ")";
  if (last_timed_out) throw Error(Errc::JudgeTimeout, msg);
  throw Error(Errc::JudgeUnavailable, msg);
}

}  // namespace simgen::matchkit
