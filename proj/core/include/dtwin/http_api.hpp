#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>

namespace dtwin {

struct HttpResponse {
  int status = 200;
  std::string body;  // JSON
};

/// Request handling over a finished run directory, independent of any
/// transport. Artifacts are loaded once and never modified; the optimize job
/// registry is the only mutable state and is written by a single worker.
///
/// Ground truth never leaves the service: only observations, posterior
/// summaries and fronts are exposed.
class TwinService {
 public:
  explicit TwinService(const std::filesystem::path& run_root, unsigned threads = 1);
  ~TwinService();
  TwinService(const TwinService&) = delete;
  TwinService& operator=(const TwinService&) = delete;

  HttpResponse list_patients() const;
  HttpResponse posterior(const std::string& id) const;
  HttpResponse pareto(const std::string& id) const;
  /// Body {u: [u2..u6], alpha, n_mc, seed}.
  HttpResponse evaluate(const std::string& id, std::string_view body, bool force) const;
  /// Body {d_max, alpha, restarts}. Runs as a background job (202 with a job
  /// id) when more than one restart is requested.
  HttpResponse optimize(const std::string& id, std::string_view body, bool force);
  HttpResponse job(const std::string& job_id) const;

  /// Waits for queued optimize jobs; for tests and orderly shutdown.
  void drain();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// HTTP/1.1 front end for a TwinService.
class HttpServer {
 public:
  explicit HttpServer(TwinService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds to host:port (port 0 picks a free one); returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves on a background thread until stop().
  void start();
  /// Serves on the calling thread until stop().
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace dtwin
