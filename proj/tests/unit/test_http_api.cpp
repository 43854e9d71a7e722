#include <gtest/gtest.h>

#include <chrono>
#include <httplib.h>
#include <json.hpp>
#include <thread>

#include "dtwin/http_api.hpp"
#include "dtwin/pipeline.hpp"
#include "tiny_run.hpp"

using namespace dtwin;
using nlohmann::json;

namespace {

class HttpApi : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    cfg_ = new RunConfig(dtwin::testing::tiny_config());
    const auto r = reproduce(*cfg_, dtwin::testing::scratch("http"));
    root_ = new std::filesystem::path(r.paths.root);
    // Flag one posterior as non-converged.
    auto e = parse_ensemble(read_text(r.paths.ensemble("P003")));
    e.ensemble.diagnostics.converged = false;
    write_text(r.paths.ensemble("P003"), serialize(e));

    service_ = new TwinService(*root_);
    server_ = new HttpServer(*service_);
    port_ = server_->bind("127.0.0.1", 0);
    server_->start();
  }

  static void TearDownTestSuite() {
    server_->stop();
    delete server_;
    delete service_;
    delete root_;
    delete cfg_;
  }

  httplib::Client client() const { return httplib::Client("127.0.0.1", port_); }

  static json post(const std::string& path, const json& body, int expected) {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(120, 0);
    const auto res = c.Post(path.c_str(), body.dump(), "application/json");
    EXPECT_TRUE(res);
    if (!res) return {};
    EXPECT_EQ(res->status, expected) << res->body;
    return json::parse(res->body);
  }

  static json get(const std::string& path, int expected) {
    httplib::Client c("127.0.0.1", port_);
    const auto res = c.Get(path.c_str());
    EXPECT_TRUE(res);
    if (!res) return {};
    EXPECT_EQ(res->status, expected) << res->body;
    return json::parse(res->body);
  }

  static RunConfig* cfg_;
  static std::filesystem::path* root_;
  static TwinService* service_;
  static HttpServer* server_;
  static int port_;
};

RunConfig* HttpApi::cfg_ = nullptr;
std::filesystem::path* HttpApi::root_ = nullptr;
TwinService* HttpApi::service_ = nullptr;
HttpServer* HttpApi::server_ = nullptr;
int HttpApi::port_ = 0;

}  // namespace

TEST_F(HttpApi, ListsPatientsWithoutGroundTruth) {
  httplib::Client c("127.0.0.1", port_);
  const auto res = c.Get("/patients");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->body.find("theta_true"), std::string::npos);
  EXPECT_EQ(res->body.find("oracle"), std::string::npos);
  const auto j = json::parse(res->body);
  ASSERT_EQ(j.at("patients").size(), 3u);
  EXPECT_EQ(j.at("patients")[0].at("id"), "P001");
  EXPECT_EQ(j.at("patients")[2].at("converged"), false);
}

TEST_F(HttpApi, PosteriorSummary) {
  const auto j = get("/patients/P001/posterior", 200);
  for (const char* name : {"rho", "K", "N_initial", "alpha_RT"}) {
    const auto& m = j.at("marginals").at(name);
    EXPECT_LE(m.at("q05").get<double>(), m.at("median").get<double>());
    EXPECT_EQ(m.at("histogram").at("counts").size(), 30u);
  }
  EXPECT_EQ(j.at("n_samples"), 800);
  EXPECT_TRUE(j.at("diagnostics").contains("r_hat"));
  const auto missing = get("/patients/P404/posterior", 404);
  EXPECT_EQ(missing.at("error"), "not_found");
  EXPECT_TRUE(missing.contains("detail"));
}

TEST_F(HttpApi, ParetoFront) {
  const auto j = get("/patients/P002/pareto", 200);
  EXPECT_EQ(j.at("points").size(), 2u);
  EXPECT_EQ(j.at("soc_reference").at("total_dose"), 60.0);
}

TEST_F(HttpApi, EvaluateMatchesLibraryExactly) {
  const auto body = post("/patients/P001/evaluate", {{"u", {2, 2, 2, 2, 2}}, {"alpha", 0.95}, {"n_mc", 1000}, {"seed", 11}}, 200);
  const auto e = parse_ensemble(read_text(*root_ / "ensembles" / "P001.json")).ensemble;
  const auto w = evaluate_what_if(*cfg_, e, TreatmentRegimen::standard_of_care(), 0.95, 1000, 11);
  EXPECT_EQ(body, json::parse(serialize(w)));
  EXPECT_EQ(body.at("ttp_samples_histogram").at("counts").size(), 132u);
  EXPECT_EQ(body.at("total_dose"), 60.0);
}

TEST_F(HttpApi, SuperquantileTightensWithTailLevel) {
  const json u = {0, 4, 4, 1, 1};
  const auto lo = post("/patients/P002/evaluate?force=1", {{"u", u}, {"alpha", 0.5}, {"n_mc", 2000}, {"seed", 2}}, 200);
  const auto hi = post("/patients/P002/evaluate?force=1", {{"u", u}, {"alpha", 0.95}, {"n_mc", 2000}, {"seed", 2}}, 200);
  EXPECT_LE(hi.at("ttp_superquantile").get<double>(), lo.at("ttp_superquantile").get<double>());
  EXPECT_LE(hi.at("ttp_superquantile").get<double>(), hi.at("ttp_quantile").get<double>());
}

TEST_F(HttpApi, RejectsInvalidRegimens) {
  EXPECT_EQ(post("/patients/P001/evaluate", {{"u", {2, 2, 11, 2, 2}}}, 422).at("error"), "invalid_regimen");
  post("/patients/P001/evaluate", {{"u", {3, 2, 2, 2, 2, 2}}}, 422);
  post("/patients/P001/evaluate", {{"u", {2, 2}}}, 422);
  post("/patients/P001/evaluate", {{"u", {2, 2, 2, 2, -1}}}, 422);
  post("/patients/P001/evaluate", {{"u", {2, 2, 2, 2, 2}}, {"n_mc", 20001}}, 422);
  post("/patients/P001/evaluate", {{"u", {2, 2, 2, 2, 2}}, {"alpha", 1.5}}, 422);
  post("/patients/P404/evaluate", {{"u", {2, 2, 2, 2, 2}}}, 404);
  httplib::Client c("127.0.0.1", port_);
  const auto res = c.Post("/patients/P001/evaluate", "{oops", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
}

TEST_F(HttpApi, NonConvergedPosteriorNeedsForce) {
  const json body = {{"u", {2, 2, 2, 2, 2}}, {"n_mc", 500}};
  EXPECT_EQ(post("/patients/P003/evaluate", body, 409).at("error"), "posterior_not_converged");
  post("/patients/P003/evaluate?force=true", body, 200);
  post("/patients/P003/optimize", {{"d_max", 40}, {"restarts", 1}}, 409);
}

TEST_F(HttpApi, SynchronousOptimizeReturnsFeasiblePoint) {
  const auto p = post("/patients/P001/optimize", {{"d_max", 50}, {"alpha", 0.95}, {"restarts", 1}}, 200);
  EXPECT_LE(p.at("total_dose").get<double>(), 50.0 + 1e-9);
  EXPECT_EQ(p.at("u")[0], 2.0);
  post("/patients/P001/optimize", {{"d_max", 5}}, 422);
}

TEST_F(HttpApi, AsynchronousOptimizeJob) {
  const auto accepted = post("/patients/P002/optimize?force=true", {{"d_max", 60}, {"restarts", 2}}, 202);
  const auto id = accepted.at("job_id").get<std::string>();
  service_->drain();
  const auto done = get("/jobs/" + id, 200);
  ASSERT_EQ(done.at("status"), "done") << done.dump();
  EXPECT_EQ(done.at("result").at("d_max"), 60.0);
  // The same seed streams as the stored front give the same 60 Gy point.
  const auto front = get("/patients/P002/pareto", 200);
  EXPECT_EQ(done.at("result").at("u"), front.at("points")[1].at("u"));
  get("/jobs/job-999", 404);
}

TEST_F(HttpApi, UnknownRouteIsJson404) {
  const auto j = get("/nothing/here", 404);
  EXPECT_EQ(j.at("error"), "not_found");
}
