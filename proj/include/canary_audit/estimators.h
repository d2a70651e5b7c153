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

#ifndef CANARY_AUDIT_ESTIMATORS_H_
#define CANARY_AUDIT_ESTIMATORS_H_

// From canary cosines to privacy numbers: point estimates of epsilon under the
// final-model and all-iterates threat models, a high-confidence lower bound
// from a thresholding attack, and a Gaussianity check on the samples.
//
// The point estimates are estimates, not certified bounds.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "canary_audit/errors.h"
#include "canary_audit/gaussian.h"
#include "canary_audit/gaussian_epsilon.h"
#include "canary_audit/samples.h"
#include "canary_audit/special_functions.h"
#include "canary_audit/sphere.h"

namespace canary_audit {

// An epsilon estimate. `value` is +inf when saturated: either a fitted
// distribution had zero spread (`degenerate_fit`) or no epsilon up to the
// search cap met the target delta.
struct EpsilonEstimate {
  double value = 0.0;
  bool saturated = false;
  bool degenerate_fit = false;

  friend bool operator==(const EpsilonEstimate&,
                         const EpsilonEstimate&) = default;
};

namespace internal {

inline EpsilonEstimate EstimateBetween(const GaussianHypothesis& null,
                                       const GaussianHypothesis& alternate,
                                       double delta) {
  internal::RequireDelta(delta);
  if (null.std == 0.0 || alternate.std == 0.0) {
    return {kInf, true, true};
  }
  const double eps = EpsilonForDelta(null, alternate, delta);
  return {eps, eps == kInf, false};
}

}  // namespace internal

// Variance of the alternate Gaussian in the final-model estimate.
// kFitted uses the sample variance of the observed cosines. kNull pins it to
// the null variance 1/d, so only the fitted mean separates the hypotheses.
enum class AlternateVariance { kFitted, kNull };

inline std::string_view AlternateVarianceName(AlternateVariance mode) {
  return mode == AlternateVariance::kFitted ? "fitted" : "null";
}

inline AlternateVariance ParseAlternateVariance(std::string_view name) {
  if (name == "fitted") return AlternateVariance::kFitted;
  if (name == "null") return AlternateVariance::kNull;
  throw std::invalid_argument("alternate variance must be 'fitted' or 'null'");
}

// Final-model estimate: fitted observed cosines against N(0, 1/d).
inline EpsilonEstimate EstimateEpsilonFinal(
    const CosineSampleSet& samples, std::size_t dim, double delta,
    AlternateVariance mode = AlternateVariance::kFitted) {
  const GaussianHypothesis null = GaussianNullApproximation(dim);
  GaussianHypothesis alternate = FitGaussianMoments(samples);
  if (mode == AlternateVariance::kNull) alternate.std = null.std;
  return internal::EstimateBetween(null, alternate, delta);
}

// All-iterates estimate: fitted max-over-rounds cosines of observed canaries
// against those of unobserved canaries. The null here is empirical; the
// unobserved maxima depend on the training trajectory.
inline EpsilonEstimate EstimateEpsilonAllIterates(
    const CosineSampleSet& observed_max, const CosineSampleSet& unobserved_max,
    double delta) {
  return internal::EstimateBetween(FitGaussianMoments(unobserved_max),
                                   FitGaussianMoments(observed_max), delta);
}

// One-sided Jeffreys upper confidence bound on a binomial proportion: the
// `confidence` quantile of Beta(failures + 1/2, n - failures + 1/2), and 1
// when every trial failed.
inline double JeffreysUpperBound(std::size_t failures, std::size_t n,
                                 double confidence) {
  if (n == 0) throw std::invalid_argument("Jeffreys bound needs n > 0");
  if (failures > n) {
    throw std::invalid_argument("failures cannot exceed trials");
  }
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw std::invalid_argument("confidence must lie in (0, 1)");
  }
  if (failures == n) return 1.0;
  const double f = static_cast<double>(failures);
  const double nn = static_cast<double>(n);
  return std::min(1.0, BetaQuantile(f + 0.5, nn - f + 0.5, confidence));
}

// How the false-positive rate of a threshold is obtained.
class NullModel {
 public:
  enum class Kind { kExact, kGaussian, kEmpirical };

  // Exact sphere-cosine law in dimension `dim`.
  static NullModel Exact(std::size_t dim) {
    return NullModel(Kind::kExact, dim, {});
  }
  // N(0, 1/d).
  static NullModel Gaussian(std::size_t dim) {
    return NullModel(Kind::kGaussian, dim, {});
  }
  // Cosines of canaries that never entered training.
  static NullModel Empirical(const CosineSampleSet& unobserved) {
    std::vector<double> sorted = unobserved.values;
    if (sorted.empty()) {
      throw std::invalid_argument("empirical null needs unobserved samples");
    }
    std::sort(sorted.begin(), sorted.end());
    return NullModel(Kind::kEmpirical, unobserved.dim, std::move(sorted));
  }
  // Exact below kGaussianNullMinDim dimensions, N(0, 1/d) at or above.
  static NullModel Default(std::size_t dim) {
    return dim >= kGaussianNullMinDim ? Gaussian(dim) : Exact(dim);
  }

  Kind kind() const { return kind_; }
  std::size_t dim() const { return dim_; }
  std::size_t sample_count() const { return sorted_.size(); }

  std::string_view Name() const {
    switch (kind_) {
      case Kind::kExact:
        return "exact";
      case Kind::kGaussian:
        return "gaussian";
      case Kind::kEmpirical:
        return "empirical";
    }
    return "unknown";
  }

  // Pr_null[g >= threshold], exact for the analytic nulls and a Jeffreys upper
  // bound for the empirical one.
  double FalsePositiveRate(double threshold, double confidence) const {
    switch (kind_) {
      case Kind::kExact:
        if (threshold > 1.0) return 0.0;
        if (threshold < -1.0) return 1.0;
        return NullCosineDistribution(dim_).UpperTail(threshold);
      case Kind::kGaussian:
        return std::exp(
            LogProbAbove(GaussianNullApproximation(dim_), threshold));
      case Kind::kEmpirical: {
        const auto first = std::lower_bound(sorted_.begin(), sorted_.end(),
                                            threshold);
        const auto positives =
            static_cast<std::size_t>(std::distance(first, sorted_.end()));
        return JeffreysUpperBound(positives, sorted_.size(), confidence);
      }
    }
    return 1.0;
  }

 private:
  NullModel(Kind kind, std::size_t dim, std::vector<double> sorted)
      : kind_(kind), dim_(dim), sorted_(std::move(sorted)) {
    if (kind_ != Kind::kEmpirical) RequireSphereDim(dim_);
  }

  Kind kind_;
  std::size_t dim_;
  std::vector<double> sorted_;
};

struct EpsilonLowerBound {
  double value = 0.0;
  double confidence = 0.95;
  // +inf when no threshold gave a positive bound.
  double threshold_used = kInf;
  double fpr = 0.0;
  double fnr_upper = 1.0;

  friend bool operator==(const EpsilonLowerBound&,
                         const EpsilonLowerBound&) = default;
};

// Lower confidence bound on epsilon from the attack "canary was observed iff
// g >= a", scanned over every observed order statistic a (and a = +inf).
//
// At each threshold FNR is bounded above with Jeffreys from the count of
// observed samples below a, and log((1 - delta - FPR) / FNR_upper) is a valid
// bound. The mirrored ratio log((1 - delta - FNR_upper) / FPR) is only used
// with an empirical null, where FPR is itself a Jeffreys upper bound; with an
// analytic null the FPR can be arbitrarily small and would not be a
// finite-sample quantity. The scan takes the best threshold, so the result is
// optimistic by the usual multiple-comparison effect.
inline EpsilonLowerBound ComputeEpsilonLowerBound(
    const CosineSampleSet& observed, const NullModel& null, double delta,
    double confidence = 0.95) {
  internal::RequireDelta(delta);
  if (observed.values.empty()) {
    throw std::invalid_argument("lower bound needs at least 1 observed sample");
  }
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw std::invalid_argument("confidence must lie in (0, 1)");
  }
  std::vector<double> sorted = observed.values;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const bool mirrored = null.kind() == NullModel::Kind::kEmpirical;

  EpsilonLowerBound best;
  best.confidence = confidence;
  for (std::size_t i = 0; i < n; ++i) {
    // Ties: every sample equal to the threshold counts as detected.
    if (i > 0 && sorted[i] == sorted[i - 1]) continue;
    const double threshold = sorted[i];
    const double fnr_upper = JeffreysUpperBound(i, n, confidence);
    const double fpr = null.FalsePositiveRate(threshold, confidence);

    double value = 0.0;
    if (1.0 - delta - fpr > 0.0 && fnr_upper > 0.0) {
      value = std::log((1.0 - delta - fpr) / fnr_upper);
    }
    if (mirrored && 1.0 - delta - fnr_upper > 0.0 && fpr > 0.0) {
      value = std::max(value, std::log((1.0 - delta - fnr_upper) / fpr));
    }
    if (value > best.value) {
      best.value = value;
      best.threshold_used = threshold;
      best.fpr = fpr;
      best.fnr_upper = fnr_upper;
    }
  }
  // a = +inf rejects nothing: FPR = 0 and FNR = 1, which never helps.
  return best;
}

// Anderson-Darling rejection levels for the normal family with estimated mean
// and variance, at 1% and 15% significance.
inline constexpr double kAndersonDarling1Pct = 1.088;
inline constexpr double kAndersonDarling15Pct = 0.574;

struct NormalityDiagnostic {
  double ad_statistic = 0.0;
  bool reject_1pct = false;
  bool reject_15pct = false;

  static NormalityDiagnostic FromStatistic(double statistic) {
    return {statistic, statistic > kAndersonDarling1Pct,
            statistic > kAndersonDarling15Pct};
  }

  friend bool operator==(const NormalityDiagnostic&,
                         const NormalityDiagnostic&) = default;
};

// Anderson-Darling A^2 against the normal family, standardizing with the
// sample mean and the (n - 1)-normalized standard deviation.
inline NormalityDiagnostic AndersonDarling(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n < 8) {
    throw std::invalid_argument("Anderson-Darling needs at least 8 samples");
  }
  const double nn = static_cast<double>(n);
  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= nn;
  double sq = 0.0;
  for (double v : samples) sq += (v - mean) * (v - mean);
  const double sd = std::sqrt(sq / (nn - 1.0));
  const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
  if (*lo == *hi || !(sd > 0.0)) {
    throw DegenerateInputError("Anderson-Darling on samples with zero spread");
  }
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = (samples[i] - mean) / sd;
  std::sort(z.begin(), z.end());
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double weight = 2.0 * static_cast<double>(i) + 1.0;
    acc += weight * (LogNormalCdf(z[i]) + LogNormalCdf(-z[n - 1 - i]));
  }
  return NormalityDiagnostic::FromStatistic(-nn - acc / nn);
}

}  // namespace canary_audit

#endif  // CANARY_AUDIT_ESTIMATORS_H_
