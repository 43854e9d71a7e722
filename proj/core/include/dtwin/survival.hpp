#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dtwin/risk.hpp"

namespace dtwin {

struct SurvivalEntry {
  std::string patient_id;
  double ttp = 0.0;  // days
  bool censored = false;
};

struct SurvivalInput {
  std::vector<SurvivalEntry> entries;

  /// Censored exactly when ttp equals max_ttp.
  static SurvivalInput from_ttp(const std::vector<std::string>& ids,
                                const std::vector<double>& ttp, double max_ttp = 132.0);
  void validate(double max_ttp = 132.0) const;
};

/// One step of the product-limit estimate, at a distinct event time.
struct SurvivalStep {
  double t = 0.0;
  double survival = 1.0;  // value from t onwards
  int at_risk = 0;
  int events = 0;
};

struct SurvivalCurve {
  std::vector<SurvivalStep> steps;  // increasing t
  std::size_t subjects = 0;

  /// P_S(t), right-continuous; 1 before the first event.
  double at(double t) const;
};

SurvivalCurve kaplan_meier(const SurvivalInput& input);

/// Pointwise spread of the survival curve from resampling each patient's
/// TTP draws.
struct SurvivalBand {
  std::vector<double> times;
  std::vector<double> survival;  // curve from the unresampled superquantiles
  std::vector<double> sd;
  std::vector<double> lower;  // survival -/+ 1.96 sd, clipped to [0, 1]
  std::vector<double> upper;
};

/// Bootstrap of the curve: every replicate resamples each patient's QoI
/// set with replacement, takes its TTP superquantile at `alpha`, and
/// rebuilds the curve. sd is the sample standard deviation over replicates
/// (zero for n_boot <= 1). Evaluated at `times`.
SurvivalBand survival_variance_band(const std::vector<QoISamples>& per_patient, double alpha,
                                    int n_boot, std::uint64_t seed,
                                    const std::vector<double>& times, double max_ttp = 132.0,
                                    unsigned threads = 1);

/// 1, 2, ..., floor(max_ttp) plus 0: the default evaluation times.
std::vector<double> daily_times(double max_ttp = 132.0);

struct LogrankResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n_a = 0;
  std::size_t n_b = 0;
  double observed_minus_expected = 0.0;  // group a
  double variance = 0.0;
};

/// Two-sample logrank test, chi-square with one degree of freedom, no
/// continuity correction.
LogrankResult logrank(const SurvivalInput& a, const SurvivalInput& b);

/// Upper tail of the chi-square distribution with one degree of freedom.
double chi_square_sf_1dof(double x);

/// Columns t_days, survival_prob, band_lo, band_hi.
void write_survival_csv(std::ostream& out, const SurvivalBand& band);

}  // namespace dtwin
