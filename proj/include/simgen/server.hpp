#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "simgen/matchkit.hpp"

namespace simgen::server {

struct ServeOptions {
  std::vector<matchkit::Trial> trials;  // loaded without truths
  std::filesystem::path results_log;
  /// Read only by the post-session report route, never while serving trials.
  std::optional<std::filesystem::path> truths_path;
  std::optional<std::filesystem::path> static_dir;  // UI assets; a minimal page is built in
  std::string host = "127.0.0.1";
  double session_ttl_s = 24 * 3600.0;
};

/// HTTP session API for human matching:
///   GET  /api/session/new?mode=color|gray   -> {session_id, total, mode}
///   GET  /api/session/{id}/next             -> trial view | {done:true}
///   POST /api/session/{id}/answer           {trial_id, choice}
///   GET  /api/session/{id}/summary          -> {answered, total, closed}
///   GET  /api/session/{id}/report           -> accuracy, only once closed
///   GET  /img/{image_id}.png[?mode=gray]
class MatcherServer {
 public:
  MatcherServer(ServeOptions opt, std::shared_ptr<matchkit::ImageStore> store);
  ~MatcherServer();
  MatcherServer(const MatcherServer&) = delete;
  MatcherServer& operator=(const MatcherServer&) = delete;

  /// Binds; port 0 picks a free port. Returns the bound port. Throws PortBusy.
  int bind(int port);
  /// Blocks until stop().
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace simgen::server
