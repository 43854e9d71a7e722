#include "dtwin/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "dtwin/cohort.hpp"
#include "dtwin/random.hpp"

namespace dtwin {

namespace {

constexpr double kBudgetTol = 1e-9;
constexpr std::size_t kTail = TreatmentRegimen::kWeeks - 1;

double soc_total_dose() { return TreatmentRegimen::standard_of_care().total_dose(); }

std::uint64_t budget_key(double d_max) {
  return static_cast<std::uint64_t>(std::llround(d_max * 1000.0));
}

// Uniform draw from { 0 <= x <= hi, sum(x) <= budget }.
std::vector<double> uniform_feasible(const BudgetBox& set, Rng& rng) {
  const std::size_t n = set.dimension();
  std::vector<double> x(n);
  const double box_sum = std::accumulate(set.upper.begin(), set.upper.end(), 0.0);
  if (set.budget >= box_sum) {
    for (std::size_t i = 0; i < n; ++i) x[i] = set.upper[i] * uniform01(rng);
    return x;
  }
  for (int attempt = 0; attempt < 100'000; ++attempt) {
    // Uniform on the full simplex via normalized exponential spacings.
    std::vector<double> e(n + 1);
    double total = 0.0;
    for (auto& v : e) {
      v = -std::log(uniform01(rng));
      total += v;
    }
    bool inside = true;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = set.budget * e[i] / total;
      inside = inside && x[i] <= set.upper[i];
    }
    if (inside) return x;
  }
  return set.project(x);
}

}  // namespace

OptimizationConfig OptimizationConfig::desk() {
  OptimizationConfig c;
  c.restarts = 5;
  c.max_evals_per_restart = 100;
  c.n_mc = 1000;
  return c;
}

OptimizationConfig OptimizationConfig::paper() { return OptimizationConfig{}; }

void OptimizationConfig::validate() const {
  if (d_max_grid.empty()) throw std::invalid_argument("d_max grid is empty");
  const double floor = TreatmentRegimen::kFirstWeekDose * 5.0;
  for (double d : d_max_grid)
    if (!(d >= floor)) throw std::invalid_argument("every d_max must be at least 10 Gy");
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be nonnegative");
  if (restarts < 1) throw std::invalid_argument("need at least one restart");
  if (max_evals_per_restart < static_cast<int>(kTail) + 2)
    throw std::invalid_argument("max_evals_per_restart too small to build a simplex");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must be in (0, 1)");
  RiskConfig{alpha, n_mc}.validate();
  RiskConfig{alpha, report_n_mc}.validate();
  if (!(rho_end > 0.0 && rho_end <= rho_begin))
    throw std::invalid_argument("need 0 < rho_end <= rho_begin");
}

const ParetoPoint* ParetoFront::at(double d_max) const {
  for (const auto& p : points)
    if (p.d_max == d_max) return &p;
  return nullptr;
}

RegimenObjective::RegimenObjective(const TtpEvaluator& frozen, double alpha, double lambda,
                                   unsigned threads)
    : frozen_(&frozen), alpha_(alpha), lambda_(lambda), threads_(threads) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must be in (0, 1)");
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be nonnegative");
}

double RegimenObjective::operator()(const TreatmentRegimen& regimen) const {
  regimen.validate(Validation::strict);
  const auto qoi = frozen_->qoi(regimen, threads_);
  return superquantile(qoi.values, alpha_) + lambda_ * regimen.l1_norm();
}

double RegimenObjective::at_tail(std::span<const double> tail) const {
  return (*this)(TreatmentRegimen::with_tail(tail));
}

double objective(const TreatmentRegimen& regimen, const TtpEvaluator& frozen,
                 const OptimizationConfig& cfg) {
  return RegimenObjective(frozen, cfg.alpha, cfg.lambda, cfg.threads)(regimen);
}

BudgetBox regimen_feasible_set(double d_max) {
  if (!(d_max >= TreatmentRegimen::kFirstWeekDose * 5.0))
    throw std::invalid_argument("d_max below the first-week dose");
  BudgetBox set;
  set.lower.assign(kTail, 0.0);
  set.upper.assign(kTail, TreatmentRegimen::kMaxDose);
  set.budget = d_max / 5.0 - TreatmentRegimen::kFirstWeekDose;
  return set;
}

std::vector<std::vector<double>> restart_points(double d_max, int restarts,
                                                std::uint64_t seed) {
  const auto set = regimen_feasible_set(d_max);
  std::vector<std::vector<double>> starts;
  const auto soc = TreatmentRegimen::standard_of_care().tail();
  starts.push_back(set.project(soc));
  auto rng = make_rng(derive_seed(seed, "optimize.start", budget_key(d_max)), "restarts");
  for (int r = 1; r < restarts; ++r) starts.push_back(uniform_feasible(set, rng));
  return starts;
}

ParetoPoint optimize_regimen(const RegimenObjective& obj, double d_max,
                             const OptimizationConfig& cfg) {
  HiddenTruthGuard guard;
  const auto set = regimen_feasible_set(d_max);
  const auto starts = restart_points(d_max, cfg.restarts, cfg.seed);

  TrustRegionOptions options;
  options.rho_begin = cfg.rho_begin;
  options.rho_end = cfg.rho_end;
  options.max_evaluations = cfg.max_evals_per_restart;

  ParetoPoint best;
  best.d_max = d_max;
  bool found = false;
  std::vector<double> best_x;
  double best_f = std::numeric_limits<double>::infinity();
  int evaluations = 0;
  const auto f = [&](std::span<const double> x) { return obj.at_tail(x); };
  for (const auto& start : starts) {
    const auto r = minimize_linear_models(f, set, start, options);
    evaluations += r.evaluations;
    if (!set.feasible(r.x, kBudgetTol)) continue;
    if (!found || preferred(r.f, r.x, best_f, best_x)) {
      best_x = r.x;
      best_f = r.f;
      found = true;
    }
  }
  if (!found) throw std::runtime_error("no restart produced a feasible regimen");

  best.regimen = TreatmentRegimen::with_tail(best_x);
  best.total_dose = best.regimen.total_dose();
  best.objective = best_f;
  best.restarts = static_cast<int>(starts.size());
  best.evaluations = evaluations;
  return best;
}

TtpEvaluator frozen_draws(const PosteriorEnsemble& ensemble, const ForwardContext& context,
                          const OptimizationConfig& cfg) {
  return TtpEvaluator(draw_parameter_set(ensemble, static_cast<std::size_t>(cfg.n_mc),
                                         derive_seed(cfg.seed, "optimize.frozen")),
                      context);
}

TtpEvaluator report_draws(const PosteriorEnsemble& ensemble, const ForwardContext& context,
                          const OptimizationConfig& cfg) {
  return TtpEvaluator(draw_parameter_set(ensemble, static_cast<std::size_t>(cfg.report_n_mc),
                                         derive_seed(cfg.seed, "optimize.report")),
                      context);
}

void report(ParetoPoint& point, const TtpEvaluator& draws, const OptimizationConfig& cfg) {
  const auto qoi = draws.qoi(point.regimen, cfg.threads);
  const auto tail = tail_risk(qoi.values, cfg.alpha);
  point.ttp_superquantile = -tail.superquantile;
  point.ttp_quantile = -tail.quantile;
  point.ttp_superquantile_se = superquantile_standard_error(qoi.values, cfg.alpha);
}

ParetoPoint optimize_regimen(const PosteriorEnsemble& ensemble, const ForwardContext& context,
                             double d_max, const OptimizationConfig& cfg) {
  cfg.validate();
  const auto frozen = frozen_draws(ensemble, context, cfg);
  const RegimenObjective obj(frozen, cfg.alpha, cfg.lambda, cfg.threads);
  auto point = optimize_regimen(obj, d_max, cfg);
  report(point, report_draws(ensemble, context, cfg), cfg);
  return point;
}

ParetoFront pareto_sweep(const PosteriorEnsemble& ensemble, const ForwardContext& context,
                         const OptimizationConfig& cfg) {
  cfg.validate();
  auto grid = cfg.d_max_grid;
  std::sort(grid.begin(), grid.end());

  const auto frozen = frozen_draws(ensemble, context, cfg);
  const auto fresh = report_draws(ensemble, context, cfg);
  const RegimenObjective obj(frozen, cfg.alpha, cfg.lambda, cfg.threads);

  ParetoFront front;
  for (double d_max : grid) {
    ParetoPoint point;
    try {
      point = optimize_regimen(obj, d_max, cfg);
      report(point, fresh, cfg);
    } catch (const std::exception& e) {
      point = ParetoPoint{};
      point.d_max = d_max;
      point.failed = true;
      point.error = e.what();
    }
    front.points.push_back(std::move(point));
  }

  auto& soc = front.soc_reference;
  soc.d_max = soc_total_dose();
  soc.regimen = TreatmentRegimen::standard_of_care();
  soc.total_dose = soc.regimen.total_dose();
  soc.objective = obj(soc.regimen);
  soc.evaluations = 1;
  report(soc, fresh, cfg);
  return front;
}

DoseReduction matched_control_dose_reduction(const ParetoFront& front, double tolerance_days) {
  if (front.points.empty()) throw std::invalid_argument("empty Pareto front");
  const double target = front.soc_reference.ttp_superquantile - tolerance_days;
  DoseReduction out;
  const ParetoPoint* match = nullptr;
  for (const auto& p : front.points) {
    if (p.failed || p.ttp_superquantile < target) continue;
    if (!match || p.total_dose < match->total_dose) match = &p;
  }
  const double reference = soc_total_dose();
  if (!match || match->total_dose > reference) {
    out.flagged = true;
    if (match) {
      out.matched_total_dose = match->total_dose;
      out.matched_d_max = match->d_max;
    }
    return out;
  }
  out.matched_total_dose = match->total_dose;
  out.matched_d_max = match->d_max;
  out.reduction_gy = reference - match->total_dose;
  return out;
}

}  // namespace dtwin
