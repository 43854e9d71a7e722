#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "dtwin/random.hpp"
#include "dtwin/truncated_normal.hpp"

using namespace dtwin;

namespace {

// Composite Simpson rule on [a, b] with n (even) panels.
template <class F>
double simpson(F f, double a, double b, int n = 20000) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

double raw_density(double x, double mu, double sd) {
  const double z = (x - mu) / sd;
  return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi));
}

struct Case {
  double mu, sd, lo, hi;
};

const std::vector<Case> kCases{
    {0.09, 0.15, 0.007, 0.25},     // proliferation prior
    {1e11, 2e10, 9e10, 1.8e11},    // carrying capacity prior
    {1.9e10, 1.2e10, 4.7e9, 4.7e10},
    {0.05, 0.025, 0.001, 0.1},
    {0.0, 1.0, 3.0, 6.0},          // far tail
};

}  // namespace

TEST(TruncatedNormal, MomentsMatchQuadrature) {
  for (const auto& c : kCases) {
    const TruncatedNormal tn(c.mu, c.sd, c.lo, c.hi);
    const double z = simpson([&](double x) { return raw_density(x, c.mu, c.sd); }, c.lo, c.hi);
    const double m1 = simpson([&](double x) { return x * raw_density(x, c.mu, c.sd); }, c.lo, c.hi) / z;
    const double m2 =
        simpson([&](double x) { return (x - m1) * (x - m1) * raw_density(x, c.mu, c.sd); }, c.lo, c.hi) / z;
    EXPECT_NEAR(tn.mass(), z, 1e-9 * std::max(1.0, z));
    EXPECT_NEAR(tn.truncated_mean(), m1, 1e-8 * std::abs(m1) + 1e-12);
    EXPECT_NEAR(tn.truncated_variance(), m2, 1e-6 * m2);
  }
}

TEST(TruncatedNormal, PdfIntegratesToCdf) {
  const TruncatedNormal tn(0.05, 0.025, 0.001, 0.1);
  for (double x : {0.001, 0.02, 0.05, 0.08, 0.1}) {
    const double area = x > tn.lower() ? simpson([&](double t) { return tn.pdf(t); }, tn.lower(), x) : 0.0;
    EXPECT_NEAR(tn.cdf(x), area, 1e-9);
  }
  EXPECT_EQ(tn.cdf(-1.0), 0.0);
  EXPECT_EQ(tn.cdf(1.0), 1.0);
  EXPECT_EQ(tn.log_pdf(0.2), -std::numeric_limits<double>::infinity());
  EXPECT_EQ(tn.pdf(0.0), 0.0);
}

TEST(TruncatedNormal, QuantileInvertsCdf) {
  for (const auto& c : kCases) {
    const TruncatedNormal tn(c.mu, c.sd, c.lo, c.hi);
    for (double p : {1e-6, 0.01, 0.3, 0.5, 0.77, 0.999}) {
      const double x = tn.quantile(p);
      EXPECT_TRUE(tn.contains(x));
      EXPECT_NEAR(tn.cdf(x), p, 1e-9);
    }
  }
}

TEST(TruncatedNormal, SemiInfiniteSupport) {
  const TruncatedNormal tn(0.0, 2e9, -5e9, TruncatedNormal::inf);
  EXPECT_NEAR(tn.cdf(0.0), (normal_cdf(0.0) - normal_cdf(-2.5)) / (1.0 - normal_cdf(-2.5)), 1e-12);
  EXPECT_GT(tn.quantile(0.9999), 0.0);
}

TEST(TruncatedNormal, SamplesPassKsTest) {
  const TruncatedNormal tn(1.9e10, 1.2e10, 4.7e9, 4.7e10);
  auto rng = make_rng(3, "tn");
  const int n = 20000;
  std::vector<double> x(n);
  for (auto& v : x) v = tn.sample(rng);
  std::sort(x.begin(), x.end());
  EXPECT_GE(x.front(), tn.lower());
  EXPECT_LE(x.back(), tn.upper());
  // Oracle CDF from the parent normal written out directly.
  const auto phi = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };
  const double a = phi((tn.lower() - 1.9e10) / 1.2e10);
  const double b = phi((tn.upper() - 1.9e10) / 1.2e10);
  double d = 0.0;
  for (int i = 0; i < n; ++i) {
    const double f = (phi((x[i] - 1.9e10) / 1.2e10) - a) / (b - a);
    d = std::max({d, std::abs(f - double(i) / n), std::abs(f - double(i + 1) / n)});
  }
  EXPECT_LT(d, 1.63 / std::sqrt(double(n)));
}

TEST(TruncatedNormal, LogCdfDeepTail) {
  // Mills-ratio asymptote: log Phi(z) ~ -z^2/2 - log(-z sqrt(2 pi)).
  const double z = -40.0;
  const double approx = -0.5 * z * z - std::log(-z * std::sqrt(2.0 * std::numbers::pi)) - 1.0 / (z * z);
  EXPECT_NEAR(normal_log_cdf(z), approx, 1e-4);
  EXPECT_NEAR(normal_log_cdf(-1.0), std::log(normal_cdf(-1.0)), 1e-14);
}

TEST(TruncatedNormal, RejectsBadArguments) {
  EXPECT_THROW(TruncatedNormal(0.0, 0.0, -1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(TruncatedNormal(0.0, 1.0, 1.0, -1.0), std::invalid_argument);
  EXPECT_THROW(TruncatedNormal(0.0, 1.0, 0.0, 1.0).quantile(1.5), std::invalid_argument);
}
