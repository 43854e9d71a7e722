#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dtwin/calibration.hpp"
#include "dtwin/growth_model.hpp"

namespace dtwin {

/// Days defining time to progression.
struct TTPConfig {
  int threshold_day = 20;  // N_th = N(threshold_day), before any treatment
  int post_rt_day = 62;    // progression is only counted strictly after this day
  int horizon_day = 152;

  double max_ttp() const { return horizon_day - threshold_day; }
  void validate(const SimulationGrid& grid, const TreatmentRegimen& regimen) const;
};

struct RiskConfig {
  double alpha = 0.95;
  int n_mc = 5000;

  void validate() const;
};

/// Model settings shared by every risk evaluation.
struct ForwardContext {
  FixedParameters fixed;
  SimulationGrid grid;
  TTPConfig ttp;
};

/// QoI realizations M = -TTP, one per parameter draw.
struct QoISamples {
  std::vector<double> values;
  std::size_t n_mc = 0;
  std::uint64_t seed = 0;

  std::vector<double> ttp() const;
};

/// Days from threshold_day until the count first exceeds N(threshold_day) at
/// a grid time in (post_rt_day, horizon_day]; max_ttp() when it never does.
double time_to_progression(const PatientParameters& theta, const FixedParameters& fixed,
                           const TreatmentRegimen& regimen, const TTPConfig& cfg,
                           const SimulationGrid& grid, Validation mode = Validation::strict);

/// Batched TTP over a fixed list of parameter draws.
///
/// The threshold count and the state at the end of the first treatment week
/// do not depend on the weeks being optimized, so they are computed once per
/// draw. Regimens with a different first week (relaxed mode only) fall back
/// to a full integration. Results are bitwise identical to
/// time_to_progression().
class TtpEvaluator {
 public:
  TtpEvaluator(std::vector<PatientParameters> thetas, const ForwardContext& context,
               const TreatmentRegimen& first_week = TreatmentRegimen::standard_of_care());

  std::size_t size() const { return thetas_.size(); }
  const std::vector<PatientParameters>& thetas() const { return thetas_; }
  const ForwardContext& context() const { return context_; }

  double evaluate_one(std::size_t index, const TreatmentRegimen& regimen) const;
  std::vector<double> evaluate(const TreatmentRegimen& regimen, unsigned threads = 1) const;
  /// -TTP per draw, as a QoI sample set.
  QoISamples qoi(const TreatmentRegimen& regimen, unsigned threads = 1) const;

 private:
  bool shares_first_week(const TreatmentRegimen& regimen) const;

  std::vector<PatientParameters> thetas_;
  ForwardContext context_;
  TreatmentRegimen first_week_;
  int resume_day_;
  std::vector<double> threshold_;
  std::vector<double> resume_state_;
};

/// Empirical alpha-quantile: order statistic ceil(alpha n), 1-based ascending.
double quantile(std::span<const double> samples, double alpha);

/// Q + mean[(x - Q)^+] / (1 - alpha). Needs n >= 1 / (1 - alpha).
double superquantile(std::span<const double> samples, double alpha);

/// Both statistics from one sort.
struct TailRisk {
  double quantile;
  double superquantile;
};
TailRisk tail_risk(std::span<const double> samples, double alpha);

/// Standard error of superquantile() from its influence function,
/// sd(Q + (x - Q)^+ / (1 - alpha)) / sqrt(n).
double superquantile_standard_error(std::span<const double> samples, double alpha);

/// `n` parameter draws from the ensemble, uniformly with replacement.
std::vector<PatientParameters> draw_parameter_set(const PosteriorEnsemble& ensemble,
                                                  std::size_t n, std::uint64_t seed);

QoISamples propagate(const PosteriorEnsemble& ensemble, const ForwardContext& context,
                     const TreatmentRegimen& regimen, const RiskConfig& risk,
                     std::uint64_t seed, unsigned threads = 1);

/// Conservative-tail TTP: -superquantile(-TTP).
double ttp_superquantile(const PosteriorEnsemble& ensemble, const ForwardContext& context,
                         const TreatmentRegimen& regimen, const RiskConfig& risk,
                         std::uint64_t seed, unsigned threads = 1);

/// CSV dump with columns sample_index, ttp_days.
void write_qoi_csv(std::ostream& out, const QoISamples& samples);

}  // namespace dtwin
