#include "dtwin/truncated_normal.hpp"

#include <algorithm>
#include <boost/math/special_functions/erf.hpp>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dtwin {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double std_pdf(double z) {
  if (!std::isfinite(z)) return 0.0;
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

// Upper-tail probability 1 - Phi(z), accurate for large positive z.
double normal_sf(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

}  // namespace

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_log_cdf(double z) {
  if (z > -30.0) return std::log(normal_cdf(z));
  // Asymptotic series for the far lower tail.
  const double z2 = z * z;
  return -0.5 * z2 - std::log(-z) - kLogSqrt2Pi +
         std::log1p(-1.0 / z2 + 3.0 / (z2 * z2));
}

double normal_quantile(double p) {
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

TruncatedNormal::TruncatedNormal(double mean, double stddev, double lower,
                                 double upper)
    : mean_(mean), stddev_(stddev), lower_(lower), upper_(upper) {
  if (!(stddev > 0.0) || !std::isfinite(stddev) || !std::isfinite(mean))
    throw std::invalid_argument("TruncatedNormal: stddev must be positive");
  if (!(lower < upper))
    throw std::invalid_argument("TruncatedNormal: lower must be < upper");
  a_ = (lower - mean) / stddev;
  b_ = (upper - mean) / stddev;
  if (a_ > 0.0) {
    mass_ = normal_sf(a_) - normal_sf(b_);
  } else {
    mass_ = normal_cdf(b_) - normal_cdf(a_);
  }
  if (!(mass_ > 0.0))
    throw std::invalid_argument(
        "TruncatedNormal: truncation interval carries no probability mass");
  log_mass_ = std::log(mass_);
}

double TruncatedNormal::log_pdf(double x) const {
  if (!(x >= lower_ && x <= upper_))
    return -std::numeric_limits<double>::infinity();
  const double z = (x - mean_) / stddev_;
  return -0.5 * z * z - kLogSqrt2Pi - std::log(stddev_) - log_mass_;
}

double TruncatedNormal::pdf(double x) const {
  const double lp = log_pdf(x);
  return std::isfinite(lp) ? std::exp(lp) : 0.0;
}

double TruncatedNormal::cdf(double x) const {
  if (x <= lower_) return 0.0;
  if (x >= upper_) return 1.0;
  const double z = (x - mean_) / stddev_;
  double c;
  if (a_ > 0.0) {
    c = (normal_sf(a_) - normal_sf(z)) / mass_;
  } else {
    c = (normal_cdf(z) - normal_cdf(a_)) / mass_;
  }
  return std::clamp(c, 0.0, 1.0);
}

double TruncatedNormal::quantile(double p) const {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("probability outside [0, 1]");
  if (p == 0.0) return lower_;
  if (p >= 1.0) return upper_;
  double z;
  if (a_ > 0.0) {
    // Work in the mirrored upper tail so probabilities stay away from 1.
    const double sf = normal_sf(a_) - p * mass_;
    z = -normal_quantile(sf);
  } else {
    z = normal_quantile(normal_cdf(a_) + p * mass_);
  }
  return std::clamp(mean_ + stddev_ * z, lower_, upper_);
}

double TruncatedNormal::sample(Rng& rng) const { return quantile(uniform01(rng)); }

double TruncatedNormal::truncated_mean() const {
  return mean_ + stddev_ * (std_pdf(a_) - std_pdf(b_)) / mass_;
}

double TruncatedNormal::truncated_variance() const {
  const double pa = std_pdf(a_);
  const double pb = std_pdf(b_);
  const double ta = std::isfinite(a_) ? a_ * pa : 0.0;
  const double tb = std::isfinite(b_) ? b_ * pb : 0.0;
  const double shift = (pa - pb) / mass_;
  return stddev_ * stddev_ * (1.0 + (ta - tb) / mass_ - shift * shift);
}

}  // namespace dtwin
