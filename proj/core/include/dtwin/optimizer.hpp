#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dtwin/calibration.hpp"
#include "dtwin/risk.hpp"
#include "dtwin/trust_region.hpp"

namespace dtwin {

struct OptimizationConfig {
  std::vector<double> d_max_grid{40, 50, 60, 70, 80, 100};  // Gy
  double lambda = 0.001;
  int restarts = 20;
  int max_evals_per_restart = 200;
  int n_mc = 5000;           // frozen draws seen by the solver
  int report_n_mc = 10'000;  // fresh draws used to report the front
  double alpha = 0.95;
  double rho_begin = 1.0;    // initial trust radius, Gy/day
  double rho_end = 1e-3;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  static OptimizationConfig desk();
  static OptimizationConfig paper();
  void validate() const;
};

struct ParetoPoint {
  double d_max = 0.0;  // Gy
  TreatmentRegimen regimen;
  double total_dose = 0.0;         // Gy
  double objective = 0.0;          // on the frozen draws
  double ttp_superquantile = 0.0;  // days, on the report draws
  double ttp_superquantile_se = 0.0;
  double ttp_quantile = 0.0;
  int restarts = 0;
  int evaluations = 0;
  bool failed = false;  // gap marker in a partial front
  std::string error;
};

struct ParetoFront {
  std::vector<ParetoPoint> points;  // ordered by d_max
  ParetoPoint soc_reference;

  const ParetoPoint* at(double d_max) const;
};

/// superquantile_alpha(-TTP) + lambda ||u||_1 over a frozen set of draws.
///
/// Refuses regimens outside the box or with the wrong first-week dose; the
/// budget is the solver's business.
class RegimenObjective {
 public:
  RegimenObjective(const TtpEvaluator& frozen, double alpha, double lambda,
                   unsigned threads = 1);

  double operator()(const TreatmentRegimen& regimen) const;
  /// Objective of the regimen with u_2..u_6 = tail.
  double at_tail(std::span<const double> tail) const;

  const TtpEvaluator& evaluator() const { return *frozen_; }
  double alpha() const { return alpha_; }
  double lambda() const { return lambda_; }

 private:
  const TtpEvaluator* frozen_;
  double alpha_;
  double lambda_;
  unsigned threads_;
};

double objective(const TreatmentRegimen& regimen, const TtpEvaluator& frozen,
                 const OptimizationConfig& cfg);

/// Box-budget set of the optimized weeks u_2..u_6 for a total-dose cap.
BudgetBox regimen_feasible_set(double d_max);

/// Start of every restart for one budget: the standard of care scaled into
/// the budget first, then uniform feasible draws.
std::vector<std::vector<double>> restart_points(double d_max, int restarts,
                                                std::uint64_t seed);

/// Multi-start minimization of `obj` subject to 5||u||_1 <= d_max, u_1 = 2,
/// 0 <= u_i <= 10. Fills regimen, total_dose, objective and the counters;
/// the report fields are left to the caller.
ParetoPoint optimize_regimen(const RegimenObjective& obj, double d_max,
                             const OptimizationConfig& cfg);

/// Same, freezing cfg.n_mc draws from the ensemble and reporting on a fresh
/// cfg.report_n_mc set.
ParetoPoint optimize_regimen(const PosteriorEnsemble& ensemble, const ForwardContext& context,
                             double d_max, const OptimizationConfig& cfg);

/// Frozen draws shared by every budget of one sweep, and the report draws
/// shared by every front point and the standard of care.
TtpEvaluator frozen_draws(const PosteriorEnsemble& ensemble, const ForwardContext& context,
                          const OptimizationConfig& cfg);
TtpEvaluator report_draws(const PosteriorEnsemble& ensemble, const ForwardContext& context,
                          const OptimizationConfig& cfg);

/// Fill the ttp_* fields of `point` from the report draws.
void report(ParetoPoint& point, const TtpEvaluator& draws, const OptimizationConfig& cfg);

/// One optimization per cap in cfg.d_max_grid plus the standard-of-care
/// reference. A failing cap leaves a point with failed = true.
ParetoFront pareto_sweep(const PosteriorEnsemble& ensemble, const ForwardContext& context,
                         const OptimizationConfig& cfg);

struct DoseReduction {
  double reduction_gy = 0.0;
  double matched_total_dose = 0.0;
  std::optional<double> matched_d_max;
  bool flagged = false;  // nothing on the front matched the reference
};

/// Cheapest front point whose TTP superquantile is within `tolerance_days`
/// of the standard of care, as a dose saving against 60 Gy.
DoseReduction matched_control_dose_reduction(const ParetoFront& front,
                                              double tolerance_days = 1.0);

}  // namespace dtwin
