#include "dtwin/http_api.hpp"

#include <fmt/format.h>
#include <httplib.h>

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <thread>

#include "dtwin/pipeline.hpp"
#include "json_io.hpp"

namespace dtwin {

namespace fs = std::filesystem;

namespace {

constexpr int kMaxWhatIfSamples = 20'000;
constexpr int kHistogramBins = 30;

HttpResponse reply(int status, const json& body) { return {status, body.dump() + "\n"}; }

HttpResponse error(int status, std::string_view code, const std::string& detail) {
  return reply(status, {{"error", code}, {"detail", detail}});
}

// Signals a 4xx with an {error, detail} body.
struct RequestError {
  int status;
  std::string code;
  std::string detail;
};

json parse_body(std::string_view body) {
  if (body.empty()) return json::object();
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    throw RequestError{400, "bad_request", std::string("body is not valid JSON: ") + e.what()};
  }
  if (!j.is_object()) throw RequestError{400, "bad_request", "body must be a JSON object"};
  return j;
}

template <class T>
T field(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw RequestError{422, "invalid_field", fmt::format("field '{}' has the wrong type", key)};
  }
}

json marginal_summary(const std::vector<double>& v) {
  std::vector<double> s = v;
  std::sort(s.begin(), s.end());
  const auto n = static_cast<double>(s.size());
  double mean = 0.0;
  for (double x : s) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : s) ss += (x - mean) * (x - mean);
  const auto q = [&](double p) {
    const auto k = static_cast<std::size_t>(std::ceil(p * n)) - 1;
    return s[std::min(k, s.size() - 1)];
  };
  const double lo = s.front();
  const double hi = s.back();
  std::vector<double> edges(kHistogramBins + 1);
  for (int b = 0; b <= kHistogramBins; ++b) edges[b] = lo + (hi - lo) * b / kHistogramBins;
  std::vector<int> counts(kHistogramBins, 0);
  for (double x : s) {
    int b = hi > lo ? static_cast<int>((x - lo) / (hi - lo) * kHistogramBins) : 0;
    ++counts[std::clamp(b, 0, kHistogramBins - 1)];
  }
  return {{"mean", mean},
          {"sd", s.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0},
          {"q05", q(0.05)},
          {"median", q(0.5)},
          {"q95", q(0.95)},
          {"histogram", {{"edges", edges}, {"counts", counts}}}};
}

}  // namespace

struct TwinService::Impl {
  struct Twin {
    std::size_t index;
    std::string id;
    ObservationSet observations;
    std::optional<EnsembleArtifact> ensemble;
    std::optional<FrontArtifact> front;
  };

  struct Job {
    std::string status = "queued";  // queued | running | done | failed
    json result;
    std::string error;
  };

  RunConfig cfg;
  std::vector<Twin> twins;

  mutable std::mutex mutex;
  std::condition_variable cv;
  std::map<std::string, Job> jobs;
  std::deque<std::pair<std::string, std::function<json()>>> queue;
  std::size_t next_job = 1;
  bool stopping = false;
  std::size_t in_flight = 0;
  std::condition_variable idle;
  std::thread worker;

  const Twin& find(const std::string& id) const {
    for (const auto& t : twins)
      if (t.id == id) return t;
    throw RequestError{404, "not_found", "unknown patient '" + id + "'"};
  }

  const EnsembleArtifact& ensemble_of(const Twin& t, bool force) const {
    if (!t.ensemble) throw RequestError{404, "not_found", "patient '" + t.id + "' is not calibrated"};
    const auto& d = t.ensemble->ensemble.diagnostics;
    if (!d.converged && !force)
      throw RequestError{409, "posterior_not_converged",
                         fmt::format("R-hat of patient '{}' exceeds {}; retry with ?force=true",
                                     t.id, d.r_hat_threshold)};
    return *t.ensemble;
  }

  void run_worker() {
    std::unique_lock lock(mutex);
    for (;;) {
      cv.wait(lock, [&] { return stopping || !queue.empty(); });
      if (stopping) return;
      auto [id, task] = std::move(queue.front());
      queue.pop_front();
      jobs[id].status = "running";
      lock.unlock();
      json result;
      std::string failure;
      try {
        result = task();
      } catch (const std::exception& e) {
        failure = e.what();
      }
      lock.lock();
      auto& job = jobs[id];
      if (failure.empty()) {
        job.status = "done";
        job.result = std::move(result);
      } else {
        job.status = "failed";
        job.error = failure;
      }
      --in_flight;
      idle.notify_all();
    }
  }
};

TwinService::TwinService(const fs::path& run_root, unsigned threads)
    : impl_(std::make_unique<Impl>()) {
  auto& m = *impl_;
  m.cfg = RunConfig::from_json(read_text(run_root / "config.json"));
  m.cfg.threads = threads;
  const auto paths = open_run(run_root, m.cfg);
  const auto cohort = parse_cohort(read_text(paths.cohort()));
  for (std::size_t i = 0; i < cohort.patients.size(); ++i) {
    const auto& p = cohort.patients[i];
    Impl::Twin t{i, p.id, p.observations, std::nullopt, std::nullopt};
    if (fs::exists(paths.ensemble(p.id))) t.ensemble = parse_ensemble(read_text(paths.ensemble(p.id)));
    if (fs::exists(paths.front(p.id))) t.front = parse_front(read_text(paths.front(p.id)));
    m.twins.push_back(std::move(t));
  }
  m.worker = std::thread([this] { impl_->run_worker(); });
}

TwinService::~TwinService() {
  {
    std::lock_guard lock(impl_->mutex);
    impl_->stopping = true;
  }
  impl_->cv.notify_all();
  if (impl_->worker.joinable()) impl_->worker.join();
}

void TwinService::drain() {
  std::unique_lock lock(impl_->mutex);
  impl_->idle.wait(lock, [&] { return impl_->in_flight == 0; });
}

HttpResponse TwinService::list_patients() const {
  json out = json::array();
  for (const auto& t : impl_->twins) {
    json entry = {{"id", t.id},
                  {"observations", t.observations.entries},
                  {"calibrated", t.ensemble.has_value()},
                  {"optimized", t.front.has_value()}};
    if (t.ensemble) entry["converged"] = t.ensemble->ensemble.diagnostics.converged;
    out.push_back(entry);
  }
  return reply(200, {{"config_hash", impl_->cfg.hash()}, {"patients", out}});
}

HttpResponse TwinService::posterior(const std::string& id) const {
  try {
    const auto& t = impl_->find(id);
    const auto& e = impl_->ensemble_of(t, true);
    json marginals = json::object();
    for (std::size_t k = 0; k < kParameterNames.size(); ++k) {
      std::vector<double> v;
      v.reserve(e.ensemble.size());
      for (const auto& s : e.ensemble.samples) v.push_back(s.as_array()[k]);
      marginals[std::string(kParameterNames[k])] = marginal_summary(v);
    }
    return reply(200, {{"patient_id", id},
                       {"n_samples", e.ensemble.size()},
                       {"marginals", marginals},
                       {"diagnostics", e.ensemble.diagnostics}});
  } catch (const RequestError& r) {
    return error(r.status, r.code, r.detail);
  }
}

HttpResponse TwinService::pareto(const std::string& id) const {
  try {
    const auto& t = impl_->find(id);
    if (!t.front) throw RequestError{404, "not_found", "patient '" + id + "' has no Pareto front"};
    return reply(200, {{"patient_id", id},
                       {"points", t.front->front.points},
                       {"soc_reference", t.front->front.soc_reference}});
  } catch (const RequestError& r) {
    return error(r.status, r.code, r.detail);
  }
}

HttpResponse TwinService::evaluate(const std::string& id, std::string_view body,
                                   bool force) const {
  try {
    const auto& t = impl_->find(id);
    const auto j = parse_body(body);
    const auto& e = impl_->ensemble_of(t, force);

    if (!j.contains("u")) throw RequestError{422, "invalid_regimen", "field 'u' is required"};
    const auto u = field<std::vector<double>>(j, "u", {});
    std::vector<double> tail;
    if (u.size() == TreatmentRegimen::kWeeks) {
      if (u[0] != TreatmentRegimen::kFirstWeekDose)
        throw RequestError{422, "invalid_regimen", "u1 is fixed at 2 Gy/day"};
      tail.assign(u.begin() + 1, u.end());
    } else if (u.size() == TreatmentRegimen::kWeeks - 1) {
      tail = u;
    } else {
      throw RequestError{422, "invalid_regimen", "u must list the doses of weeks 2 to 6"};
    }
    for (double v : tail)
      if (!(v >= 0.0 && v <= TreatmentRegimen::kMaxDose))
        throw RequestError{422, "invalid_regimen",
                           fmt::format("weekly dose {} outside [0, 10] Gy/day", v)};

    const double alpha = field<double>(j, "alpha", impl_->cfg.risk.alpha);
    const int n_mc = field<int>(j, "n_mc", impl_->cfg.risk.n_mc);
    const auto seed = field<std::uint64_t>(j, "seed", 0);
    if (!(alpha > 0.0 && alpha < 1.0))
      throw RequestError{422, "invalid_field", "alpha must lie in (0, 1)"};
    if (n_mc < 1 || n_mc > kMaxWhatIfSamples)
      throw RequestError{422, "invalid_field",
                         fmt::format("n_mc must lie in [1, {}]", kMaxWhatIfSamples)};
    if (n_mc * (1.0 - alpha) < 20.0)
      throw RequestError{422, "invalid_field", "need n_mc * (1 - alpha) >= 20 tail samples"};

    const auto w = evaluate_what_if(impl_->cfg, e.ensemble, TreatmentRegimen::with_tail(tail),
                                    alpha, n_mc, seed);
    return {200, serialize(w)};
  } catch (const RequestError& r) {
    return error(r.status, r.code, r.detail);
  } catch (const std::invalid_argument& ex) {
    return error(422, "invalid_request", ex.what());
  }
}

HttpResponse TwinService::optimize(const std::string& id, std::string_view body, bool force) {
  try {
    auto& m = *impl_;
    const auto& t = m.find(id);
    const auto j = parse_body(body);
    const auto& e = m.ensemble_of(t, force);

    auto o = patient_optimization(m.cfg, t.index);
    o.threads = m.cfg.threads;
    if (!j.contains("d_max")) throw RequestError{422, "invalid_field", "field 'd_max' is required"};
    const double d_max = field<double>(j, "d_max", 0.0);
    o.alpha = field<double>(j, "alpha", o.alpha);
    o.restarts = field<int>(j, "restarts", o.restarts);
    if (!(d_max >= TreatmentRegimen::kFirstWeekDose * 5.0))
      throw RequestError{422, "invalid_field", "d_max must be at least 10 Gy"};
    o.d_max_grid = {d_max};
    try {
      o.validate();
    } catch (const std::invalid_argument& ex) {
      throw RequestError{422, "invalid_field", ex.what()};
    }

    const auto* ensemble = &e.ensemble;
    const auto context = m.cfg.forward();
    auto task = [ensemble, context, d_max, o] {
      return json(optimize_regimen(*ensemble, context, d_max, o));
    };
    if (o.restarts <= 1) return reply(200, task());

    std::string job_id;
    {
      std::lock_guard lock(m.mutex);
      job_id = fmt::format("job-{}", m.next_job++);
      m.jobs[job_id] = Impl::Job{};
      m.queue.emplace_back(job_id, task);
      ++m.in_flight;
    }
    m.cv.notify_one();
    return reply(202, {{"job_id", job_id}, {"status", "queued"}});
  } catch (const RequestError& r) {
    return error(r.status, r.code, r.detail);
  }
}

HttpResponse TwinService::job(const std::string& job_id) const {
  std::lock_guard lock(impl_->mutex);
  const auto it = impl_->jobs.find(job_id);
  if (it == impl_->jobs.end()) return error(404, "not_found", "unknown job '" + job_id + "'");
  json out = {{"job_id", job_id}, {"status", it->second.status}};
  if (it->second.status == "done") out["result"] = it->second.result;
  if (it->second.status == "failed") out["detail"] = it->second.error;
  return reply(200, out);
}

struct HttpServer::Impl {
  TwinService& service;
  httplib::Server server;
  std::thread thread;

  explicit Impl(TwinService& s) : service(s) {}
};

HttpServer::HttpServer(TwinService& service) : impl_(std::make_unique<Impl>(service)) {
  auto& srv = impl_->server;
  auto& svc = impl_->service;
  const auto send = [](httplib::Response& res, const HttpResponse& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  const auto forced = [](const httplib::Request& req) {
    if (!req.has_param("force")) return false;
    const auto v = req.get_param_value("force");
    return v != "false" && v != "0";
  };

  srv.Get("/patients", [&, send](const httplib::Request&, httplib::Response& res) {
    send(res, svc.list_patients());
  });
  srv.Get(R"(/patients/([^/]+)/posterior)", [&, send](const httplib::Request& req, httplib::Response& res) {
    send(res, svc.posterior(req.matches[1]));
  });
  srv.Get(R"(/patients/([^/]+)/pareto)", [&, send](const httplib::Request& req, httplib::Response& res) {
    send(res, svc.pareto(req.matches[1]));
  });
  srv.Post(R"(/patients/([^/]+)/evaluate)",
           [&, send, forced](const httplib::Request& req, httplib::Response& res) {
             send(res, svc.evaluate(req.matches[1], req.body, forced(req)));
           });
  srv.Post(R"(/patients/([^/]+)/optimize)",
           [&, send, forced](const httplib::Request& req, httplib::Response& res) {
             send(res, svc.optimize(req.matches[1], req.body, forced(req)));
           });
  srv.Get(R"(/jobs/([^/]+))", [&, send](const httplib::Request& req, httplib::Response& res) {
    send(res, svc.job(req.matches[1]));
  });
  srv.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    const json body = {{"error", res.status == 404 ? "not_found" : "http_error"},
                       {"detail", fmt::format("{} {}", req.method, req.path)}};
    res.set_content(body.dump() + "\n", "application/json");
  });
  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string detail = "unknown error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      detail = e.what();
    } catch (...) {
    }
    res.status = 500;
    res.set_content(json({{"error", "internal"}, {"detail", detail}}).dump() + "\n",
                    "application/json");
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  auto& srv = impl_->server;
  if (port == 0) {
    const int bound = srv.bind_to_any_port(host);
    if (bound < 0) throw std::runtime_error("cannot bind " + host);
    return bound;
  }
  if (!srv.bind_to_port(host, port))
    throw std::runtime_error(fmt::format("cannot bind {}:{}", host, port));
  return port;
}

void HttpServer::start() {
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void HttpServer::run() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace dtwin
