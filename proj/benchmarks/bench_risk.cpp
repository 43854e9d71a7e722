#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "dtwin/cohort.hpp"
#include "dtwin/optimizer.hpp"
#include "dtwin/risk.hpp"

using namespace dtwin;

static void BM_Superquantile(benchmark::State& state) {
  std::mt19937_64 gen(7);
  std::normal_distribution<double> normal;
  std::vector<double> x(static_cast<std::size_t>(state.range(0)));
  for (auto& v : x) v = normal(gen);
  for (auto _ : state) benchmark::DoNotOptimize(superquantile(x, 0.95));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Superquantile)->Arg(1000)->Arg(10000)->Arg(100000);

// One optimizer objective evaluation over a frozen draw set.
static void BM_RegimenObjective(benchmark::State& state) {
  const ForwardContext ctx;
  TtpEvaluator frozen(sample_cohort(PriorSpec{}, static_cast<std::size_t>(state.range(0)), 11),
                      ctx);
  RegimenObjective objective(frozen, 0.95, 0.001, 1);
  const auto regimen = TreatmentRegimen::standard_of_care();
  for (auto _ : state) benchmark::DoNotOptimize(objective(regimen));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RegimenObjective)->Arg(1000)->Arg(5000);
