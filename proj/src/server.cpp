#include "simgen/server.hpp"

#include <chrono>
#include <fstream>
#include <map>
#include <mutex>

#include "httplib.h"
#include "json.hpp"

namespace simgen::server {

using nlohmann::json;
using matchkit::Mode;
using Clock = std::chrono::steady_clock;

namespace {

constexpr const char* kIndexPage = R"html(<!doctype html>
<html><head><meta charset="utf-8"><title>Image matching</title>
<style>
body{font-family:sans-serif;margin:1em;background:#222;color:#eee}
#grid{display:grid;grid-template-columns:repeat(5,1fr);gap:8px}
#grid img,#ref{width:100%;image-rendering:pixelated;cursor:pointer;border:2px solid #444}
#ref{width:30%;cursor:default}
</style></head><body>
<p>Pick the candidate generated by the same process as the reference. Keys 1-9 select candidates 1-9, key 0 selects candidate 10.</p>
<div id="status"></div><img id="ref"><div id="grid"></div>
<script>
let sid=null, cur=null;
const mode=new URLSearchParams(location.search).get('mode')||'color';
async function next(){
  const r=await (await fetch(`/api/session/${sid}/next`)).json();
  if(r.done){
    const s=await (await fetch(`/api/session/${sid}/summary`)).json();
    const rep=await fetch(`/api/session/${sid}/report`);
    const acc=rep.ok?(await rep.json()).accuracy:null;
    document.body.innerHTML=`<h2>Done: ${s.answered}/${s.total}</h2>`+(acc===null?'':`<p>accuracy ${acc}</p>`);
    return;
  }
  cur=r; document.getElementById('ref').src=r.reference;
  const g=document.getElementById('grid'); g.innerHTML='';
  r.candidates.forEach((u,i)=>{const im=document.createElement('img');im.src=u;im.title=String(i+1);im.onclick=()=>answer(i);g.appendChild(im);});
  const s=await (await fetch(`/api/session/${sid}/summary`)).json();
  document.getElementById('status').textContent=`${s.answered+1} / ${s.total}`;
}
async function answer(i){
  await fetch(`/api/session/${sid}/answer`,{method:'POST',headers:{'Content-Type':'application/json'},body:JSON.stringify({trial_id:cur.trial_id,choice:i})});
  next();
}
document.addEventListener('keydown',e=>{if(cur&&/^[0-9]$/.test(e.key)){answer(e.key==='0'?9:Number(e.key)-1);}});
fetch(`/api/session/new?mode=${mode}`).then(r=>r.json()).then(j=>{sid=j.session_id;next();});
</script></body></html>
)html";

struct Session {
  std::string id;
  Mode mode = Mode::Color;
  std::vector<std::size_t> order;  // indices into the trial list
  std::map<std::string, std::size_t> answers;
  std::map<std::string, Clock::time_point> served;
  Clock::time_point last_seen = Clock::now();
  bool closed() const { return answers.size() == order.size(); }
};

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, Errc code, const std::string& msg) {
  send_json(res, status, json{{"error", std::string(errc_name(code))}, {"message", msg}});
}

}  // namespace

struct MatcherServer::Impl {
  ServeOptions opt;
  std::shared_ptr<matchkit::ImageStore> store;
  httplib::Server http;
  std::mutex mu;  // sessions and the results log
  std::map<std::string, Session> sessions;
  std::map<std::string, std::size_t> trial_index;
  std::map<std::string, bool> served_images;
  std::uint64_t counter = 0;
  std::uint64_t salt = static_cast<std::uint64_t>(Clock::now().time_since_epoch().count());

  Impl(ServeOptions o, std::shared_ptr<matchkit::ImageStore> s) : opt(std::move(o)), store(std::move(s)) {
    for (std::size_t i = 0; i < opt.trials.size(); ++i) {
      const auto& t = opt.trials[i];
      trial_index[t.id] = i;
      served_images[t.reference] = true;
      for (const auto& c : t.candidates) served_images[c] = true;
    }
    // The library default enables SO_REUSEPORT, which would let a second
    // server share a busy port silently.
    http.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
    });
    routes();
  }

  // Caller holds mu.
  Session* find_session(const std::string& id) {
    const auto it = sessions.find(id);
    if (it == sessions.end()) return nullptr;
    const double age = std::chrono::duration<double>(Clock::now() - it->second.last_seen).count();
    if (age > opt.session_ttl_s) {
      sessions.erase(it);
      return nullptr;
    }
    it->second.last_seen = Clock::now();
    return &it->second;
  }

  std::string new_session_id() {
    char buf[24];
    std::snprintf(buf, sizeof buf, "s%016llx", static_cast<unsigned long long>(mix64(salt ^ mix64(++counter))));
    return buf;
  }

  json trial_view(const matchkit::Trial& t, Mode mode) const {
    const std::string q = mode == Mode::Gray ? "?mode=gray" : "";
    json cands = json::array();
    for (const auto& c : t.candidates) cands.push_back("/img/" + c + ".png" + q);
    return json{{"trial_id", t.id}, {"mode", matchkit::mode_name(mode)},
                {"reference", "/img/" + t.reference + ".png" + q}, {"candidates", cands}};
  }

  void append_log(const matchkit::LoggedChoice& c) {
    std::ofstream out(opt.results_log, std::ios::app);
    if (!out) throw Error(Errc::Io, "cannot append to " + opt.results_log.string());
    out << matchkit::choice_to_json_line(c) << '\n';
    out.flush();
  }

  void routes() {
    http.Get("/", [this](const httplib::Request&, httplib::Response& res) {
      if (opt.static_dir && std::filesystem::exists(*opt.static_dir / "index.html")) {
        const auto bytes = read_file(*opt.static_dir / "index.html");
        res.set_content(std::string(bytes.begin(), bytes.end()), "text/html");
        return;
      }
      res.set_content(kIndexPage, "text/html");
    });
    if (opt.static_dir) http.set_mount_point("/static", opt.static_dir->string());

    http.Get("/api/session/new", [this](const httplib::Request& req, httplib::Response& res) {
      Mode mode = Mode::Color;
      try {
        if (req.has_param("mode")) mode = matchkit::parse_mode(req.get_param_value("mode"));
      } catch (const Error& e) {
        return send_error(res, 400, e.code(), e.what());
      }
      std::lock_guard lock(mu);
      Session s;
      s.id = new_session_id();
      s.mode = mode;
      for (std::size_t i = 0; i < opt.trials.size(); ++i) s.order.push_back(i);
      const json body{{"session_id", s.id}, {"total", s.order.size()}, {"mode", matchkit::mode_name(mode)}};
      sessions.emplace(s.id, std::move(s));
      send_json(res, 200, body);
    });

    http.Get(R"(/api/session/([^/]+)/next)", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mu);
      Session* s = find_session(req.matches[1]);
      if (!s) return send_error(res, 404, Errc::SessionExpired, "unknown or expired session");
      for (const std::size_t i : s->order) {
        const auto& t = opt.trials[i];
        if (s->answers.count(t.id)) continue;
        s->served.emplace(t.id, Clock::now());
        return send_json(res, 200, trial_view(t, s->mode));
      }
      send_json(res, 200, json{{"done", true}});
    });

    http.Post(R"(/api/session/([^/]+)/answer)", [this](const httplib::Request& req, httplib::Response& res) {
      json body;
      try {
        body = json::parse(req.body);
      } catch (const json::exception&) {
        return send_error(res, 400, Errc::Parse, "body must be JSON {trial_id, choice}");
      }
      if (!body.is_object() || !body.contains("trial_id") || !body["trial_id"].is_string())
        return send_error(res, 400, Errc::Parse, "missing trial_id");
      if (!body.contains("choice") || !body["choice"].is_number_integer() || body["choice"].get<long long>() < 0 ||
          body["choice"].get<long long>() >= static_cast<long long>(matchkit::kCandidates))
        return send_error(res, 400, Errc::OutOfRange, "choice must be an integer in 0..9");
      const auto trial_id = body["trial_id"].get<std::string>();
      const auto choice = body["choice"].get<std::size_t>();

      std::lock_guard lock(mu);
      Session* s = find_session(req.matches[1]);
      if (!s) return send_error(res, 404, Errc::SessionExpired, "unknown or expired session");
      const auto ti = trial_index.find(trial_id);
      if (ti == trial_index.end()) return send_error(res, 404, Errc::UnknownTrial, "trial not in this session");
      if (s->answers.count(trial_id))
        return send_error(res, 409, Errc::AlreadyAnswered, "first answer already recorded");
      double latency = 0.0;
      if (const auto it = s->served.find(trial_id); it != s->served.end())
        latency = std::chrono::duration<double, std::milli>(Clock::now() - it->second).count();
      try {
        append_log({trial_id, matchkit::Evaluator::Human, choice, latency, s->id, 0});
      } catch (const Error& e) {
        return send_error(res, 500, e.code(), e.what());
      }
      s->answers[trial_id] = choice;
      send_json(res, 200, json{{"ok", true}, {"answered", s->answers.size()}, {"total", s->order.size()}});
    });

    http.Get(R"(/api/session/([^/]+)/summary)", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mu);
      Session* s = find_session(req.matches[1]);
      if (!s) return send_error(res, 404, Errc::SessionExpired, "unknown or expired session");
      send_json(res, 200, json{{"answered", s->answers.size()}, {"total", s->order.size()}, {"closed", s->closed()}});
    });

    http.Get(R"(/api/session/([^/]+)/report)", [this](const httplib::Request& req, httplib::Response& res) {
      std::vector<matchkit::LoggedChoice> answers;
      {
        std::lock_guard lock(mu);
        Session* s = find_session(req.matches[1]);
        if (!s) return send_error(res, 404, Errc::SessionExpired, "unknown or expired session");
        if (!s->closed()) return send_error(res, 409, Errc::OutOfRange, "report is available once the session closes");
        if (!opt.truths_path) return send_error(res, 404, Errc::Io, "server was started without a truths file");
        for (const auto& [tid, c] : s->answers) answers.push_back({tid, matchkit::Evaluator::Human, c, 0.0, s->id, 0});
      }
      if (answers.empty()) return send_json(res, 200, json{{"n", 0}});
      try {
        auto trials = opt.trials;
        const auto bytes = read_file(*opt.truths_path);
        matchkit::attach_truths(trials, std::string(bytes.begin(), bytes.end()));
        const auto report = matchkit::accuracy_report(matchkit::score_all(answers, trials));
        send_json(res, 200, json{{"n", report.n}, {"correct", report.correct}, {"accuracy", report.accuracy}});
      } catch (const Error& e) {
        send_error(res, 500, e.code(), e.what());
      }
    });

    http.Get(R"(/img/([^/]+)\.png)", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      if (!served_images.count(id)) return send_error(res, 404, Errc::UnknownTrial, "no such image");
      Mode mode = Mode::Color;
      if (req.has_param("mode") && req.get_param_value("mode") == "gray") mode = Mode::Gray;
      try {
        const auto png = store->png(id, mode);
        res.set_content(std::string(png.begin(), png.end()), "image/png");
      } catch (const Error& e) {
        send_error(res, 500, e.code(), e.what());
      }
    });
  }
};

MatcherServer::MatcherServer(ServeOptions opt, std::shared_ptr<matchkit::ImageStore> store)
    : impl_(std::make_unique<Impl>(std::move(opt), std::move(store))) {}

MatcherServer::~MatcherServer() { stop(); }

int MatcherServer::bind(int port) {
  if (port == 0) {
    const int p = impl_->http.bind_to_any_port(impl_->opt.host);
    if (p <= 0) throw Error(Errc::PortBusy, "could not bind any port on " + impl_->opt.host);
    return p;
  }
  if (!impl_->http.bind_to_port(impl_->opt.host, port))
    throw Error(Errc::PortBusy, "port " + std::to_string(port) + " is unavailable");
  return port;
}

void MatcherServer::run() { impl_->http.listen_after_bind(); }

void MatcherServer::stop() {
  if (impl_) impl_->http.stop();
}

}  // namespace simgen::server
