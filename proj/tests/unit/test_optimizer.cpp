#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dtwin/optimizer.hpp"
#include "dtwin/random.hpp"

using namespace dtwin;

namespace {

PosteriorEnsemble cloud(const PatientParameters& center, int n, std::uint64_t seed) {
  PosteriorEnsemble e;
  auto rng = make_rng(seed, "cloud");
  for (int i = 0; i < n; ++i) {
    auto t = center;
    t.rho *= std::exp(0.1 * standard_normal(rng));
    t.alpha_RT *= std::exp(0.2 * standard_normal(rng));
    t.N_initial *= std::exp(0.1 * standard_normal(rng));
    e.samples.push_back(t);
  }
  return e;
}

OptimizationConfig small_config() {
  OptimizationConfig c;
  c.d_max_grid = {40, 60, 80};
  c.restarts = 2;
  c.max_evals_per_restart = 40;
  c.n_mc = 400;
  c.report_n_mc = 800;
  c.seed = 5;
  return c;
}

TtpEvaluator frozen_of(const PosteriorEnsemble& e, int n, std::uint64_t seed) {
  return TtpEvaluator(draw_parameter_set(e, static_cast<std::size_t>(n), seed), ForwardContext{});
}

}  // namespace

TEST(Optimizer, ObjectiveAtStandardOfCare) {
  const auto e = cloud(case_study_patient(2), 300, 1);
  const auto frozen = frozen_of(e, 400, 2);
  const auto soc = TreatmentRegimen::standard_of_care();
  const RegimenObjective plain(frozen, 0.95, 0.0);
  const RegimenObjective penalized(frozen, 0.95, 0.001);
  const auto ttp = frozen.evaluate(soc);
  std::vector<double> m;
  for (double t : ttp) m.push_back(-t);
  EXPECT_DOUBLE_EQ(plain(soc), superquantile(m, 0.95));
  EXPECT_NEAR(penalized(soc) - plain(soc), 0.012, 1e-12);
}

TEST(Optimizer, ObjectiveIsMonotoneInDose) {
  const auto e = cloud(case_study_patient(3), 300, 3);
  const auto frozen = frozen_of(e, 400, 4);
  const RegimenObjective obj(frozen, 0.95, 0.0);
  auto rng = make_rng(6, "dom");
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<double> lo(5), hi(5);
    for (int i = 0; i < 5; ++i) {
      lo[i] = 6.0 * uniform01(rng);
      hi[i] = std::min(10.0, lo[i] + 4.0 * uniform01(rng));
    }
    EXPECT_GE(obj.at_tail(lo), obj.at_tail(hi));
  }
}

TEST(Optimizer, ObjectiveRefusesOutOfBoxRegimens) {
  const auto e = cloud(case_study_patient(1), 50, 1);
  const auto frozen = frozen_of(e, 100, 1);
  const RegimenObjective obj(frozen, 0.9, 0.0);
  EXPECT_THROW(obj.at_tail(std::vector<double>{11, 0, 0, 0, 0}), std::invalid_argument);
  EXPECT_THROW(obj.at_tail(std::vector<double>{-0.1, 0, 0, 0, 0}), std::invalid_argument);
  auto r = TreatmentRegimen::standard_of_care();
  r.weekly_doses[0] = 3.0;
  EXPECT_THROW(obj(r), std::invalid_argument);
}

TEST(Optimizer, RestartPointsAreFeasibleAndStartAtStandardOfCare) {
  for (double d_max : {10.0, 40.0, 60.0, 100.0, 300.0}) {
    const auto set = regimen_feasible_set(d_max);
    const auto starts = restart_points(d_max, 20, 9);
    ASSERT_EQ(starts.size(), 20u);
    for (const auto& s : starts) EXPECT_TRUE(set.feasible(s, 1e-9));
    const double soc_sum = std::accumulate(starts[0].begin(), starts[0].end(), 0.0);
    EXPECT_NEAR(soc_sum, std::min(10.0, d_max / 5.0 - 2.0), 1e-9);
  }
  EXPECT_EQ(restart_points(60, 5, 1), restart_points(60, 5, 1));
  EXPECT_THROW(regimen_feasible_set(9.0), std::invalid_argument);
}

// With a radio-resistant ensemble and a heavy penalty, dose buys nothing.
// Grid oracle: the zero tail beats every point of a coarse grid.
TEST(Optimizer, HeavyPenaltyDrivesDoseToZero) {
  auto center = case_study_patient(1);
  center.alpha_RT = 0.001;
  const auto e = cloud(center, 200, 2);
  const auto frozen = frozen_of(e, 200, 3);
  const RegimenObjective obj(frozen, 0.9, 10.0);
  const std::vector<double> zero(5, 0.0);
  for (double a : {0.0, 2.5, 5.0})
    for (double b : {0.0, 2.5, 5.0}) {
      if (a == 0.0 && b == 0.0) continue;
      EXPECT_LT(obj.at_tail(zero), obj.at_tail(std::vector<double>{a, b, a, b, a}));
    }
  auto cfg = small_config();
  const auto p = optimize_regimen(obj, 60.0, cfg);
  for (double u : p.regimen.tail()) EXPECT_LT(u, 0.05);
  EXPECT_NEAR(p.objective, obj.at_tail(zero), 2.5);
}

TEST(Optimizer, LateProgressorsUseLessThanTheCap) {
  PatientParameters slow{0.01, 1e11, 1e10, 0.08};
  const auto e = cloud(slow, 200, 4);
  auto cfg = small_config();
  const auto p = optimize_regimen(e, ForwardContext{}, 80.0, cfg);
  EXPECT_DOUBLE_EQ(p.ttp_superquantile, 132.0);
  EXPECT_LT(p.total_dose, 80.0 - 1.0);
}

TEST(Optimizer, FrontIsFeasibleNonInferiorAndDeterministic) {
  const auto e = cloud(case_study_patient(2), 400, 5);
  const auto cfg = small_config();
  const auto front = pareto_sweep(e, ForwardContext{}, cfg);
  ASSERT_EQ(front.points.size(), 3u);
  for (const auto& p : front.points) {
    ASSERT_FALSE(p.failed) << p.error;
    EXPECT_LE(p.total_dose, p.d_max + 1e-9);
    EXPECT_DOUBLE_EQ(p.regimen.weekly_doses[0], 2.0);
    for (double u : p.regimen.weekly_doses) {
      EXPECT_GE(u, 0.0);
      EXPECT_LE(u, 10.0);
    }
    EXPECT_GT(p.evaluations, 0);
    EXPECT_EQ(p.restarts, 2);
  }
  const auto* p60 = front.at(60.0);
  ASSERT_NE(p60, nullptr);
  EXPECT_LE(p60->objective, front.soc_reference.objective);
  EXPECT_DOUBLE_EQ(front.soc_reference.total_dose, 60.0);

  const auto again = pareto_sweep(e, ForwardContext{}, cfg);
  for (std::size_t i = 0; i < front.points.size(); ++i) {
    EXPECT_EQ(front.points[i].regimen.weekly_doses, again.points[i].regimen.weekly_doses);
    EXPECT_EQ(front.points[i].ttp_superquantile, again.points[i].ttp_superquantile);
  }
}

TEST(Optimizer, SingletonGridAndValidation) {
  const auto e = cloud(case_study_patient(3), 200, 6);
  auto cfg = small_config();
  cfg.d_max_grid = {60};
  const auto front = pareto_sweep(e, ForwardContext{}, cfg);
  EXPECT_EQ(front.points.size(), 1u);
  cfg.d_max_grid = {5};
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = small_config();
  cfg.lambda = -1;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

namespace {

ParetoFront handmade(std::initializer_list<std::pair<double, double>> dose_and_ttp, double soc_ttp) {
  ParetoFront f;
  for (auto [d, t] : dose_and_ttp) {
    ParetoPoint p;
    p.d_max = d;
    p.total_dose = d;
    p.ttp_superquantile = t;
    f.points.push_back(p);
  }
  f.soc_reference.total_dose = 60.0;
  f.soc_reference.ttp_superquantile = soc_ttp;
  return f;
}

}  // namespace

TEST(Optimizer, MatchedControlDoseReduction) {
  const auto r1 = matched_control_dose_reduction(handmade({{40, 99.5}, {60, 104}, {80, 110}}, 100.0));
  EXPECT_DOUBLE_EQ(r1.reduction_gy, 20.0);
  EXPECT_FALSE(r1.flagged);
  const auto r2 = matched_control_dose_reduction(handmade({{40, 90}, {50, 99.2}, {60, 101}}, 100.0));
  EXPECT_DOUBLE_EQ(r2.reduction_gy, 10.0);
  const auto r3 = matched_control_dose_reduction(handmade({{40, 90}, {80, 100}}, 100.0));
  EXPECT_DOUBLE_EQ(r3.reduction_gy, 0.0);
  EXPECT_TRUE(r3.flagged);
  const auto r4 = matched_control_dose_reduction(handmade({{40, 90}}, 100.0));
  EXPECT_TRUE(r4.flagged);
  EXPECT_THROW(matched_control_dose_reduction(ParetoFront{}), std::invalid_argument);
}
