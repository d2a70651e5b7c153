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

#ifndef CANARY_AUDIT_SPECIAL_FUNCTIONS_H_
#define CANARY_AUDIT_SPECIAL_FUNCTIONS_H_

#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/special_functions/beta.hpp>

namespace canary_audit {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Standard normal CDF.
inline double NormalCdf(double z) {
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

// log Phi(z), accurate in both tails. Below z = -30 erfc loses relative
// precision well before it underflows, so the asymptotic series takes over.
inline double LogNormalCdf(double z) {
  if (std::isnan(z)) return z;
  if (z == kInf) return 0.0;
  if (z == -kInf) return -kInf;
  if (z > 5.0) return std::log1p(-0.5 * std::erfc(z / std::numbers::sqrt2));
  if (z > -30.0) return std::log(0.5 * std::erfc(-z / std::numbers::sqrt2));
  const double inv_z2 = 1.0 / (z * z);
  // 1 - 1/z^2 + 3/z^4 - 15/z^6 + 105/z^8 - 945/z^10
  const double series =
      1.0 +
      inv_z2 * (-1.0 +
                inv_z2 * (3.0 +
                          inv_z2 * (-15.0 + inv_z2 * (105.0 - 945.0 * inv_z2))));
  return -0.5 * z * z - std::log(-z) - 0.5 * std::log(2.0 * std::numbers::pi) +
         std::log(series);
}

// log(1 - exp(x)) for x <= 0.
inline double Log1mExp(double x) {
  if (x > -std::numbers::ln2) return std::log(-std::expm1(x));
  return std::log1p(-std::exp(x));
}

// log(exp(a) + exp(b)).
inline double LogAddExp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double hi = a > b ? a : b;
  const double lo = a > b ? b : a;
  return hi + std::log1p(std::exp(lo - hi));
}

// Regularized incomplete beta I_x(a, b) and its complement.
inline double RegularizedBeta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  return boost::math::ibeta(a, b, x);
}

inline double RegularizedBetaComplement(double a, double b, double x) {
  if (x <= 0.0) return 1.0;
  if (x >= 1.0) return 0.0;
  return boost::math::ibetac(a, b, x);
}

// Quantile of Beta(a, b) at probability p.
inline double BetaQuantile(double a, double b, double p) {
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return 1.0;
  return boost::math::ibeta_inv(a, b, p);
}

}  // namespace canary_audit

#endif  // CANARY_AUDIT_SPECIAL_FUNCTIONS_H_
