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

#ifndef CANARY_AUDIT_SPHERE_H_
#define CANARY_AUDIT_SPHERE_H_

// Uniform points on the unit sphere S^{d-1} and the law of the cosine between
// such a point and any independent nonzero vector.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "canary_audit/gaussian.h"
#include "canary_audit/random.h"
#include "canary_audit/special_functions.h"

namespace canary_audit {

// Dimension below which the exact cosine law is used by default. At and above
// it, N(0, 1/d) is indistinguishable from the exact law for our purposes.
inline constexpr std::size_t kGaussianNullMinDim = 1000;

inline void RequireSphereDim(std::size_t dim) {
  if (dim < 2) {
    throw std::invalid_argument("sphere dimension must be at least 2, got " +
                                std::to_string(dim));
  }
}

// Four interleaved partial sums, so the loop vectorizes without reassociation
// flags. The summation order is fixed, which keeps results reproducible.
inline double Dot(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

inline double Norm(std::span<const double> a) { return std::sqrt(Dot(a, a)); }

// A point on S^{d-1}.
class UnitVector {
 public:
  // Normalizes `coords`. Throws if the vector is too short or zero.
  explicit UnitVector(std::vector<double> coords) : coords_(std::move(coords)) {
    RequireSphereDim(coords_.size());
    const double norm = Norm(coords_);
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      throw std::invalid_argument("cannot normalize a zero or non-finite vector");
    }
    for (double& c : coords_) c /= norm;
  }

  std::size_t dim() const { return coords_.size(); }
  std::span<const double> coords() const { return coords_; }
  double operator[](std::size_t i) const { return coords_[i]; }

 private:
  std::vector<double> coords_;
};

// Fills `out` with a uniform point on the sphere by normalizing i.i.d.
// standard normals. Returns the norm of the raw Gaussian vector.
inline double SampleUnitSphereInto(std::span<double> out, GaussianStream& rng) {
  RequireSphereDim(out.size());
  double norm;
  do {
    rng.Fill(out);
    norm = Norm(out);
  } while (norm == 0.0);
  const double inv = 1.0 / norm;
  for (double& v : out) v *= inv;
  return norm;
}

inline UnitVector SampleUnitSphere(std::size_t dim, GaussianStream& rng) {
  RequireSphereDim(dim);
  std::vector<double> coords(dim);
  SampleUnitSphereInto(coords, rng);
  return UnitVector(std::move(coords));
}

// Law of tau_d = <c, v>/|v| for c uniform on S^{d-1}:
//   f_d(t) = Gamma(d/2) / (Gamma((d-1)/2) sqrt(pi)) (1 - t^2)^((d-3)/2).
// (1 + tau_d)/2 ~ Beta((d-1)/2, (d-1)/2), which gives the CDF.
class NullCosineDistribution {
 public:
  explicit NullCosineDistribution(std::size_t dim) : dim_(dim) {
    RequireSphereDim(dim);
    const double d = static_cast<double>(dim);
    log_normalizer_ = std::lgamma(d / 2.0) - std::lgamma((d - 1.0) / 2.0) -
                      0.5 * std::log(std::numbers::pi);
    exponent_ = (d - 3.0) / 2.0;
    beta_shape_ = (d - 1.0) / 2.0;
  }

  std::size_t dim() const { return dim_; }
  double variance() const { return 1.0 / static_cast<double>(dim_); }

  // Density at t. Returns +inf at |t| = 1 when d = 2.
  double Pdf(double t) const {
    CheckDomain(t);
    if (exponent_ == 0.0) return std::exp(log_normalizer_);
    const double one_minus_t2 = (1.0 - t) * (1.0 + t);
    if (one_minus_t2 == 0.0) return exponent_ < 0.0 ? kInf : 0.0;
    return std::exp(log_normalizer_ + exponent_ * std::log(one_minus_t2));
  }

  // Pr[tau_d <= t].
  double Cdf(double t) const {
    CheckDomain(t);
    if (t > 0.0) return 1.0 - UpperTail(t);
    return RegularizedBeta(beta_shape_, beta_shape_, 0.5 * (1.0 + t));
  }

  // Pr[tau_d > t], accurate far into the upper tail.
  double UpperTail(double t) const {
    CheckDomain(t);
    return RegularizedBeta(beta_shape_, beta_shape_, 0.5 * (1.0 - t));
  }

 private:
  static void CheckDomain(double t) {
    if (!(t >= -1.0 && t <= 1.0)) {
      throw std::domain_error("cosine must lie in [-1, 1]");
    }
  }

  std::size_t dim_;
  double log_normalizer_;
  double exponent_;
  double beta_shape_;
};

// N(0, 1/d), the large-d limit of the cosine law.
inline GaussianHypothesis GaussianNullApproximation(std::size_t dim) {
  RequireSphereDim(dim);
  return {0.0, 1.0 / std::sqrt(static_cast<double>(dim))};
}

}  // namespace canary_audit

#endif  // CANARY_AUDIT_SPHERE_H_
