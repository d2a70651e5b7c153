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

#ifndef CANARY_AUDIT_GAUSSIAN_EPSILON_H_
#define CANARY_AUDIT_GAUSSIAN_EPSILON_H_

// Exact (epsilon, delta) trade-off between two Gaussians with arbitrary means
// and variances.
//
// With P1 = N(mu1, s1^2) and P2 = N(mu2, s2^2), the log density ratio
// log p1(x)/p2(x) is the quadratic a x^2 + b x + c. The privacy loss variables
// are Z1 = f(X1), X1 ~ P1 and Z2 = -f(X2), X2 ~ P2, and the smallest delta at
// a given epsilon is
//
//   max(0, Pr[Z1 > eps] - e^eps Pr[-Z2 > eps],
//          Pr[Z2 > eps] - e^eps Pr[-Z1 > eps]).
//
// Each event is {x : quadratic(x) > 0} for a shifted quadratic, so its mass is
// a sum of Gaussian tail or interval masses between the quadratic's roots. All
// of this is carried out in the log domain.

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "canary_audit/errors.h"
#include "canary_audit/gaussian.h"
#include "canary_audit/special_functions.h"

namespace canary_audit {

// Default largest epsilon the line search will report before saturating.
inline constexpr double kDefaultEpsilonCap = 1e6;

// log p1(x)/p2(x) = a x^2 + b x + c.
struct LogRatioQuadratic {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;

  static LogRatioQuadratic From(const GaussianHypothesis& p1,
                                const GaussianHypothesis& p2) {
    const double v1 = p1.std * p1.std;
    const double v2 = p2.std * p2.std;
    const double z1 = p1.mean / p1.std;
    const double z2 = p2.mean / p2.std;
    return {0.5 * (1.0 / v2 - 1.0 / v1), p1.mean / v1 - p2.mean / v2,
            0.5 * (z2 * z2 - z1 * z1) + std::log(p2.std) - std::log(p1.std)};
  }

  double operator()(double x) const { return (a * x + b) * x + c; }
};

// log Pr[a X^2 + b X + c > 0] for X ~ p. Every sign case of a and of the
// discriminant is handled explicitly, including the linear case a == 0.
inline double LogProbQuadraticPositive(double a, double b, double c,
                                       const GaussianHypothesis& p) {
  if (a == 0.0) {
    if (b == 0.0) return c > 0.0 ? 0.0 : -kInf;
    const double root = -c / b;
    return b > 0.0 ? LogProbAbove(p, root) : LogProbBelow(p, root);
  }
  const double disc = b * b - 4.0 * a * c;
  if (!(disc > 0.0)) {
    // No sign change: the quadratic has the sign of a almost everywhere.
    return a > 0.0 ? 0.0 : -kInf;
  }
  const double sqrt_disc = std::sqrt(disc);
  const double q = -0.5 * (b + std::copysign(sqrt_disc, b));
  double r1 = q / a;
  double r2 = q != 0.0 ? c / q : -r1;
  if (r1 > r2) std::swap(r1, r2);
  if (a > 0.0) return LogAddExp(LogProbBelow(p, r1), LogProbAbove(p, r2));
  return LogProbBetween(p, r1, r2);
}

namespace internal {

// Pr[A] - e^eps Pr[B] from log Pr[A] and log Pr[B], floored at zero.
inline double DirectionalDelta(double log_p, double log_q, double epsilon) {
  if (log_p == -kInf) return 0.0;
  const double gap = epsilon + log_q - log_p;
  if (!(gap < 0.0)) return 0.0;
  return std::exp(log_p + Log1mExp(gap));
}

inline void RequireDelta(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("delta must lie strictly inside (0, 1)");
  }
}

}  // namespace internal

// Smallest delta for which P1 vs P2 is (epsilon, delta)-indistinguishable in
// both directions.
inline double DeltaForEpsilon(const GaussianHypothesis& p1,
                              const GaussianHypothesis& p2, double epsilon) {
  p1.Validate();
  p2.Validate();
  if (!(epsilon >= 0.0)) {
    throw std::invalid_argument("epsilon must be nonnegative");
  }
  if (epsilon == kInf) return 0.0;
  const LogRatioQuadratic f = LogRatioQuadratic::From(p1, p2);
  // {Z1 > eps} and {-Z2 > eps} are both {f(x) - eps > 0}.
  const double forward = internal::DirectionalDelta(
      LogProbQuadraticPositive(f.a, f.b, f.c - epsilon, p1),
      LogProbQuadraticPositive(f.a, f.b, f.c - epsilon, p2), epsilon);
  // {Z2 > eps} and {-Z1 > eps} are both {-f(x) - eps > 0}.
  const double backward = internal::DirectionalDelta(
      LogProbQuadraticPositive(-f.a, -f.b, -f.c - epsilon, p2),
      LogProbQuadraticPositive(-f.a, -f.b, -f.c - epsilon, p1), epsilon);
  return std::max(forward, backward);
}

// Smallest epsilon >= 0 with DeltaForEpsilon(p1, p2, epsilon) <= delta.
// Returns +inf when even `cap` does not suffice.
inline double EpsilonForDelta(const GaussianHypothesis& p1,
                              const GaussianHypothesis& p2, double delta,
                              double cap = kDefaultEpsilonCap) {
  internal::RequireDelta(delta);
  p1.Validate();
  p2.Validate();
  auto delta_at = [&](double eps) { return DeltaForEpsilon(p1, p2, eps); };
  if (delta_at(0.0) <= delta) return 0.0;

  double lo = 0.0;
  double hi = 1.0;
  while (delta_at(hi) > delta) {
    lo = hi;
    if (hi >= cap) return kInf;
    hi = std::min(2.0 * hi, cap);
  }
  // Invariant: delta_at(lo) > delta >= delta_at(hi).
  for (int step = 0; step < 200; ++step) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (delta_at(mid) > delta) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

// Noise scale sigma such that N(0, sigma^2) vs N(1, sigma^2) has exactly the
// target epsilon at the given delta.
inline double CalibrateGaussianSigma(double epsilon, double delta) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw std::invalid_argument("epsilon must be positive and finite");
  }
  internal::RequireDelta(delta);
  auto eps_at = [&](double sigma) {
    return EpsilonForDelta({0.0, sigma}, {1.0, sigma}, delta);
  };
  // Epsilon is decreasing in sigma.
  double lo = 1.0;
  double hi = 1.0;
  int guard = 0;
  while (eps_at(lo) <= epsilon) {
    lo *= 0.5;
    if (++guard > 200) throw NoConvergenceError("cannot bracket sigma from below");
  }
  guard = 0;
  while (eps_at(hi) > epsilon) {
    hi *= 2.0;
    if (++guard > 200) throw NoConvergenceError("cannot bracket sigma from above");
  }
  for (int step = 0; step < 200; ++step) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (eps_at(mid) > epsilon) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

}  // namespace canary_audit

#endif  // CANARY_AUDIT_GAUSSIAN_EPSILON_H_
