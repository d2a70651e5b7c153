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

#ifndef CANARY_AUDIT_GAUSSIAN_H_
#define CANARY_AUDIT_GAUSSIAN_H_

#include <cmath>
#include <stdexcept>

#include "canary_audit/special_functions.h"

namespace canary_audit {

// A univariate normal model of a test statistic under one hypothesis. A fitted
// hypothesis may carry std == 0; such values are rejected wherever a proper
// density is needed.
struct GaussianHypothesis {
  double mean = 0.0;
  double std = 1.0;

  bool IsProper() const {
    return std::isfinite(mean) && std::isfinite(std) && std > 0.0;
  }

  void Validate() const {
    if (!IsProper()) {
      throw std::invalid_argument(
          "Gaussian hypothesis needs finite mean and positive finite std");
    }
  }

  friend bool operator==(const GaussianHypothesis&,
                         const GaussianHypothesis&) = default;
};

// log Pr[X < t] for X ~ p.
inline double LogProbBelow(const GaussianHypothesis& p, double t) {
  return LogNormalCdf((t - p.mean) / p.std);
}

// log Pr[X > t] for X ~ p, evaluated as log Pr[Y < mean] with Y centred at t,
// which keeps the far upper tail in the accurate branch of LogNormalCdf.
inline double LogProbAbove(const GaussianHypothesis& p, double t) {
  return LogNormalCdf((p.mean - t) / p.std);
}

// log Pr[lo < X < hi] for X ~ p, lo <= hi.
inline double LogProbBetween(const GaussianHypothesis& p, double lo,
                             double hi) {
  if (!(lo < hi)) return -kInf;
  const double z_lo = (lo - p.mean) / p.std;
  const double z_hi = (hi - p.mean) / p.std;
  if (z_lo >= 0.0) {
    // Both in the upper half: Q(z_lo) - Q(z_hi).
    const double q_lo = LogNormalCdf(-z_lo);
    const double q_hi = LogNormalCdf(-z_hi);
    if (q_lo == -kInf) return -kInf;
    return q_lo + Log1mExp(q_hi - q_lo);
  }
  if (z_hi <= 0.0) {
    const double c_hi = LogNormalCdf(z_hi);
    const double c_lo = LogNormalCdf(z_lo);
    if (c_hi == -kInf) return -kInf;
    return c_hi + Log1mExp(c_lo - c_hi);
  }
  return std::log1p(-(NormalCdf(z_lo) + NormalCdf(-z_hi)));
}

}  // namespace canary_audit

#endif  // CANARY_AUDIT_GAUSSIAN_H_
