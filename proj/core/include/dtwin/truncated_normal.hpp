#pragma once

#include <limits>

#include "dtwin/random.hpp"

namespace dtwin {

double normal_cdf(double z);
double normal_log_cdf(double z);
double normal_quantile(double p);

/// Normal(mean, stddev^2) restricted to [lower, upper].
///
/// `mean` and `stddev` are the parameters of the parent normal, not the
/// moments of the truncated law (see truncated_mean/truncated_variance).
/// `upper` may be +infinity and `lower` -infinity.
class TruncatedNormal {
 public:
  static constexpr double inf = std::numeric_limits<double>::infinity();

  TruncatedNormal(double mean, double stddev, double lower, double upper);

  double mean() const { return mean_; }
  double stddev() const { return stddev_; }
  double lower() const { return lower_; }
  double upper() const { return upper_; }

  bool contains(double x) const { return x >= lower_ && x <= upper_; }

  /// -infinity outside [lower, upper].
  double log_pdf(double x) const;
  double pdf(double x) const;
  double cdf(double x) const;
  double quantile(double p) const;

  /// Inverse-CDF draw; one uniform per call.
  double sample(Rng& rng) const;

  double truncated_mean() const;
  double truncated_variance() const;

  /// Probability mass of the parent normal inside [lower, upper].
  double mass() const { return mass_; }

 private:
  double mean_;
  double stddev_;
  double lower_;
  double upper_;
  double a_;  // standardized bounds
  double b_;
  double mass_;
  double log_mass_;
};

}  // namespace dtwin
