#include <gtest/gtest.h>

#include <filesystem>

#include "dtwin/config.hpp"

using namespace dtwin;

TEST(Config, PresetsFixRunSizes) {
  const auto desk = RunConfig::preset(Scale::desk);
  EXPECT_EQ(desk.cohort_size, 20);
  EXPECT_EQ(desk.mcmc.chains, 4);
  EXPECT_EQ(desk.mcmc.samples_per_chain, 10'000);
  EXPECT_EQ(desk.optimization.n_mc, 1000);
  EXPECT_EQ(desk.optimization.restarts, 5);
  EXPECT_EQ(desk.optimization.max_evals_per_restart, 100);
  const auto paper = RunConfig::preset(Scale::paper);
  EXPECT_EQ(paper.cohort_size, 100);
  EXPECT_EQ(paper.mcmc.samples_per_chain, 100'000);
  EXPECT_EQ(paper.optimization.n_mc, 5000);
  EXPECT_EQ(paper.optimization.restarts, 20);
  EXPECT_EQ(paper.optimization.max_evals_per_restart, 200);
  EXPECT_EQ(desk.optimization.d_max_grid, (std::vector<double>{40, 50, 60, 70, 80, 100}));
  EXPECT_DOUBLE_EQ(desk.optimization.lambda, 0.001);
}

TEST(Config, JsonRoundTripIsExact) {
  auto c = RunConfig::preset(Scale::paper);
  c.seed = 123456789012345ULL;
  c.prior.rho.mean = 0.1 / 3.0;
  const auto text = c.to_json();
  const auto back = RunConfig::from_json(text);
  EXPECT_EQ(back.to_json(), text);
  EXPECT_EQ(back.hash(), c.hash());
}

TEST(Config, PartialOverridesKeepPresetDefaults) {
  const auto c = RunConfig::from_json(R"({"scale": "paper", "seed": 7, "mcmc": {"thin": 50}})");
  EXPECT_EQ(c.scale, Scale::paper);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.mcmc.thin, 50);
  EXPECT_EQ(c.mcmc.samples_per_chain, 100'000);
  const auto d = RunConfig::from_json(R"({"cohort_size": 3})", Scale::paper);
  EXPECT_EQ(d.scale, Scale::paper);
  EXPECT_EQ(d.cohort_size, 3);
}

TEST(Config, RejectsUnknownOrInvalidEntries) {
  EXPECT_THROW(RunConfig::from_json(R"({"cohort": 3})"), std::invalid_argument);
  EXPECT_THROW(RunConfig::from_json(R"({"mcmc": {"chain": 3}})"), std::invalid_argument);
  EXPECT_THROW(RunConfig::from_json(R"({"scale": "huge"})"), std::invalid_argument);
  EXPECT_THROW(RunConfig::from_json(R"({"cohort_size": "many"})"), std::invalid_argument);
  EXPECT_THROW(RunConfig::from_json(R"({"optimization": {"d_max_grid": [5]}})"), std::invalid_argument);
  EXPECT_THROW(RunConfig::from_json("not json"), std::invalid_argument);
}

TEST(Config, HashTracksContentButNotThreads) {
  auto a = RunConfig::preset(Scale::desk);
  auto b = a;
  b.threads = 8;
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_EQ(a.hash().size(), 16u);
  b.optimization.lambda = 0.002;
  EXPECT_NE(a.hash(), b.hash());
  const auto diff = config_diff(a, b);
  ASSERT_EQ(diff.size(), 1u);
  EXPECT_EQ(diff[0], "optimization.lambda: 0.001 -> 0.002");
}

TEST(Config, MissingFileIsReported) {
  EXPECT_THROW(load_config("/nonexistent/dtwin.json"), ConfigNotFound);
}
