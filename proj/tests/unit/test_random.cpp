#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "dtwin/random.hpp"

using namespace dtwin;

TEST(Random, DerivedSeedsAreStableAndDistinct) {
  EXPECT_EQ(derive_seed(42, "cohort", 3), derive_seed(42, "cohort", 3));
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(derive_seed(42, "mcmc", i));
  seen.insert(derive_seed(42, "cohort", 0));
  seen.insert(derive_seed(43, "mcmc", 0));
  EXPECT_EQ(seen.size(), 1002u);
}

TEST(Random, Fnv1aKnownValues) {
  // Published FNV-1a 64-bit test vectors.
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(Random, UniformStaysInsideOpenInterval) {
  auto rng = make_rng(7, "u");
  double lo = 1.0, hi = 0.0, sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = uniform01(rng);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    sum += u;
  }
  EXPECT_GT(lo, 0.0);
  EXPECT_LT(hi, 1.0);
  EXPECT_NEAR(sum / n, 0.5, 0.005);
}

// Kolmogorov-Smirnov distance against the normal CDF written via erfc.
TEST(Random, StandardNormalPassesKsTest) {
  auto rng = make_rng(11, "z");
  const int n = 20000;
  std::vector<double> z(n);
  for (auto& v : z) v = standard_normal(rng);
  std::sort(z.begin(), z.end());
  double d = 0.0;
  for (int i = 0; i < n; ++i) {
    const double f = 0.5 * std::erfc(-z[i] / std::sqrt(2.0));
    d = std::max({d, std::abs(f - double(i) / n), std::abs(f - double(i + 1) / n)});
  }
  // 1% critical value 1.63 / sqrt(n).
  EXPECT_LT(d, 1.63 / std::sqrt(double(n)));
}
