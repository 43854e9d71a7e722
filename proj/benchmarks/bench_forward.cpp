#include <benchmark/benchmark.h>

#include "dtwin/growth_model.hpp"
#include "dtwin/risk.hpp"

using namespace dtwin;

static void BM_SimulateSoc(benchmark::State& state) {
  const auto theta = case_study_patient(2);
  const SimulationGrid grid;
  for (auto _ : state) {
    auto traj = simulate(theta, FixedParameters{}, TreatmentRegimen::standard_of_care(), grid);
    benchmark::DoNotOptimize(traj.values.back());
  }
}
BENCHMARK(BM_SimulateSoc);

static void BM_TimeToProgression(benchmark::State& state) {
  const auto theta = case_study_patient(1);
  const SimulationGrid grid;
  const TTPConfig ttp;
  for (auto _ : state) {
    benchmark::DoNotOptimize(time_to_progression(
        theta, FixedParameters{}, TreatmentRegimen::standard_of_care(), ttp, grid));
  }
}
BENCHMARK(BM_TimeToProgression);
