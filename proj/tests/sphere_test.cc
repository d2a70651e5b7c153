// Copyright 2026 The Canary Audit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "canary_audit/sphere.h"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "canary_audit/random.h"
#include "canary_audit/special_functions.h"
#include "gtest/gtest.h"

namespace canary_audit {
namespace {

// Composite Simpson rule with n (even) panels.
template <typename F>
double Simpson(F f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

TEST(SphereTest, RejectsTooSmallDimensions) {
  EXPECT_THROW(RequireSphereDim(0), std::invalid_argument);
  EXPECT_THROW(RequireSphereDim(1), std::invalid_argument);
  EXPECT_NO_THROW(RequireSphereDim(2));
  EXPECT_THROW(NullCosineDistribution(1), std::invalid_argument);
  EXPECT_THROW(GaussianNullApproximation(1), std::invalid_argument);
}

TEST(SphereTest, UnitVectorNormalizes) {
  UnitVector u({3.0, 4.0});
  EXPECT_DOUBLE_EQ(u[0], 0.6);
  EXPECT_DOUBLE_EQ(u[1], 0.8);
  EXPECT_THROW(UnitVector({0.0, 0.0}), std::invalid_argument);
  EXPECT_THROW(UnitVector({1.0}), std::invalid_argument);
}

TEST(SphereTest, SampledPointsAreUnitNorm) {
  GaussianStream rng(1, StreamPurpose::kTest, 0);
  for (std::size_t d : {2u, 3u, 50u, 10000u}) {
    const UnitVector u = SampleUnitSphere(d, rng);
    EXPECT_NEAR(Norm(u.coords()), 1.0, 1e-12);
  }
}

TEST(SphereTest, DotMatchesNaiveSum) {
  std::vector<double> a(1003), b(1003);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = std::sin(0.1 * i);
    b[i] = std::cos(0.3 * i);
  }
  double naive = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) naive += a[i] * b[i];
  EXPECT_NEAR(Dot(a, b), naive, 1e-12);
}

TEST(NullCosineDistributionTest, PdfIntegratesToOne) {
  for (std::size_t d : {3u, 4u, 5u, 10u, 100u, 1000u, 10000u}) {
    const NullCosineDistribution dist(d);
    // The mass sits within a few multiples of 1/sqrt(d) of zero.
    const double w = std::min(1.0, 40.0 / std::sqrt(static_cast<double>(d)));
    const double mass =
        Simpson([&](double t) { return dist.Pdf(t); }, -w, w, 200000);
    EXPECT_NEAR(mass, 1.0, 1e-8) << "d = " << d;
  }
}

TEST(NullCosineDistributionTest, SpecialDimensions) {
  // d = 2: arcsine law, infinite density at the ends.
  const NullCosineDistribution two(2);
  EXPECT_EQ(two.Pdf(1.0), kInf);
  EXPECT_NEAR(two.Pdf(0.0), 1.0 / std::numbers::pi, 1e-15);
  for (double t : {-0.9, -0.2, 0.0, 0.5, 0.99}) {
    EXPECT_NEAR(two.Cdf(t), 0.5 + std::asin(t) / std::numbers::pi, 1e-13);
  }
  // d = 3: uniform on [-1, 1].
  const NullCosineDistribution three(3);
  for (double t : {-1.0, -0.3, 0.0, 0.7, 1.0}) {
    EXPECT_NEAR(three.Pdf(t), 0.5, 1e-14);
    EXPECT_NEAR(three.Cdf(t), 0.5 * (1.0 + t), 1e-14);
  }
  EXPECT_EQ(NullCosineDistribution(4).Pdf(1.0), 0.0);
}

TEST(NullCosineDistributionTest, CdfMatchesQuadratureOfPdf) {
  for (std::size_t d : {4u, 10u, 57u, 1000u}) {
    const NullCosineDistribution dist(d);
    for (double t : {-0.5, -0.05, 0.0, 0.02, 0.3}) {
      const double integral =
          Simpson([&](double s) { return dist.Pdf(s); }, -1.0, t, 400000);
      EXPECT_NEAR(dist.Cdf(t), integral, 1e-9) << "d = " << d << " t = " << t;
    }
  }
}

TEST(NullCosineDistributionTest, HighPrecisionValues) {
  // mpmath.betainc at 40 digits and mpmath.quad of the density.
  EXPECT_NEAR(NullCosineDistribution(10).Cdf(0.3), 0.81495843885896605665,
              1e-14);
  EXPECT_NEAR(NullCosineDistribution(1000).Cdf(0.05), 0.94305429543096098836,
              1e-13);
  EXPECT_NEAR(NullCosineDistribution(100000).UpperTail(0.02) /
                  1.2650115748045026707e-10,
              1.0, 1e-9);
  EXPECT_NEAR(NullCosineDistribution(100000).UpperTail(0.03) /
                  1.1674542792481469229e-21,
              1.0, 1e-9);
}

TEST(NullCosineDistributionTest, CdfAndUpperTailAreComplementary) {
  const NullCosineDistribution dist(250);
  for (double t = -0.99; t < 1.0; t += 0.0731) {
    EXPECT_NEAR(dist.Cdf(t) + dist.UpperTail(t), 1.0, 1e-14);
  }
  EXPECT_THROW(dist.Cdf(1.5), std::domain_error);
  EXPECT_THROW(dist.Pdf(-1.01), std::domain_error);
}

TEST(NullCosineDistributionTest, GaussianLimitIsClose) {
  for (std::size_t d : {1000u, 10000u, 100000u}) {
    const NullCosineDistribution dist(d);
    const double s = std::sqrt(static_cast<double>(d));
    double gap = 0.0;
    for (double z = -6.0; z <= 6.0; z += 0.01) {
      gap = std::max(gap, std::fabs(dist.Cdf(z / s) - NormalCdf(z)));
    }
    EXPECT_LE(gap, 1e-3) << "d = " << d;
  }
  EXPECT_DOUBLE_EQ(GaussianNullApproximation(400).std, 0.05);
  EXPECT_DOUBLE_EQ(NullCosineDistribution(400).variance(), 1.0 / 400.0);
}

TEST(NullCosineDistributionTest, ListedValues) {
  EXPECT_DOUBLE_EQ(NullCosineDistribution(7).Cdf(0.0), 0.5);
  EXPECT_DOUBLE_EQ(NullCosineDistribution(12345).Cdf(0.0), 0.5);
  EXPECT_NEAR(NullCosineDistribution(3).Cdf(0.5), 0.75, 1e-15);
  EXPECT_NEAR(NullCosineDistribution(10000).Cdf(0.02), 0.9772, 5e-4);
  EXPECT_DOUBLE_EQ(GaussianNullApproximation(10000).std, 0.01);
  EXPECT_NEAR(GaussianNullApproximation(4100000).std, 4.938e-4, 1e-7);
  EXPECT_DOUBLE_EQ(GaussianNullApproximation(1000000).std, 0.001);
  EXPECT_EQ(GaussianNullApproximation(1000000).mean, 0.0);
}

TEST(NullCosineDistributionTest, CdfIsMonotoneWithFixedEnds) {
  for (std::size_t d : {2u, 5u, 80u, 3000u}) {
    const NullCosineDistribution dist(d);
    EXPECT_EQ(dist.Cdf(-1.0), 0.0);
    EXPECT_EQ(dist.Cdf(1.0), 1.0);
    double prev = 0.0;
    for (double t = -1.0; t <= 1.0; t += 1e-3) {
      const double c = dist.Cdf(t);
      EXPECT_GE(c, prev);
      prev = c;
    }
  }
}

TEST(NullCosineDistributionTest, CdfDerivativeIsPdf) {
  for (std::size_t d : {5u, 50u, 500u}) {
    const NullCosineDistribution dist(d);
    const double h = 1e-5;
    for (double t = -0.9; t <= 0.9; t += 0.01) {
      const double slope = (dist.Cdf(t + h) - dist.Cdf(t - h)) / (2 * h);
      EXPECT_NEAR(slope, dist.Pdf(t), 1e-5) << "d = " << d << " t = " << t;
    }
  }
}

// For uniform c, E[<c, x><c, y>] = <x, y>/d.
TEST(SphereTest, ProjectionCovarianceIsInnerProductOverD) {
  const std::size_t d = 16;
  const int n = 1000000;
  std::vector<double> x(d), y(d);
  for (std::size_t i = 0; i < d; ++i) {
    x[i] = std::sin(1.0 + i);
    y[i] = std::sin(1.0 + i) + 0.5 * std::cos(2.0 * i);
  }
  GaussianStream rng(3, StreamPurpose::kTest, 0);
  std::vector<double> c(d);
  double sum = 0.0, sum_sq = 0.0;
  for (int k = 0; k < n; ++k) {
    SampleUnitSphereInto(c, rng);
    const double v = Dot(c, x) * Dot(c, y);
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sum_sq / n - mean * mean) / n);
  EXPECT_NEAR(mean, Dot(x, y) / d, 3.0 * se);
}

// Cosine with a fixed random direction, for sampled uniform points.
double SampledCosineVariance(std::size_t d, int n, std::uint64_t seed) {
  GaussianStream dir_rng(seed, StreamPurpose::kTest, 0);
  const UnitVector v = SampleUnitSphere(d, dir_rng);
  GaussianStream rng(seed, StreamPurpose::kTest, 1);
  std::vector<double> c(d);
  double sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    SampleUnitSphereInto(c, rng);
    const double g = Dot(c, v.coords());
    sum_sq += g * g;
  }
  return sum_sq / n;
}

TEST(NullCosineDistributionTest, SampledVarianceIsOneOverD) {
  for (std::size_t d : {100u, 1000u}) {
    const int n = 100000;
    const double dd = static_cast<double>(d);
    // Var[tau^2] = E[tau^4] - E[tau^2]^2 with E[tau^4] = 3/(d(d+2)).
    const double se =
        std::sqrt((3.0 / (dd * (dd + 2.0)) - 1.0 / (dd * dd)) / n);
    EXPECT_NEAR(SampledCosineVariance(d, n, 21), 1.0 / dd, 3.0 * se)
        << "d = " << d;
  }
}

}  // namespace
}  // namespace canary_audit
