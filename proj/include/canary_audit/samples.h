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

#ifndef CANARY_AUDIT_SAMPLES_H_
#define CANARY_AUDIT_SAMPLES_H_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "canary_audit/gaussian.h"

namespace canary_audit {

enum class SampleLabel { kObserved, kUnobserved };

inline std::string_view LabelName(SampleLabel label) {
  return label == SampleLabel::kObserved ? "observed" : "unobserved";
}

inline SampleLabel ParseLabel(std::string_view name) {
  if (name == "observed") return SampleLabel::kObserved;
  if (name == "unobserved") return SampleLabel::kUnobserved;
  throw std::invalid_argument("unknown sample label '" + std::string(name) +
                              "'");
}

// Canary cosine statistics from one experiment (or a pool of experiments).
struct CosineSampleSet {
  std::size_t dim = 0;
  std::vector<double> values;
  SampleLabel label = SampleLabel::kObserved;

  void Validate() const {
    for (double v : values) {
      if (!(v >= -1.0 && v <= 1.0)) {
        throw std::domain_error("cosine sample outside [-1, 1]");
      }
    }
  }

  std::size_t size() const { return values.size(); }

  friend bool operator==(const CosineSampleSet&,
                         const CosineSampleSet&) = default;
};

// Mean and 1/k-normalized standard deviation. The result may have std == 0.
inline GaussianHypothesis FitGaussianMoments(std::span<const double> values) {
  if (values.size() < 2) {
    throw std::invalid_argument("moment fit needs at least 2 samples");
  }
  const double k = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / k;
  // Constant input must fit exactly zero spread; the rounded mean need not
  // equal the common value.
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (*lo == *hi) return {*lo, 0.0};
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return {mean, std::sqrt(sq / k)};
}

inline GaussianHypothesis FitGaussianMoments(const CosineSampleSet& samples) {
  return FitGaussianMoments(std::span<const double>(samples.values));
}

// Concatenates sample sets from independent runs, preserving order.
inline CosineSampleSet PoolRuns(std::span<const CosineSampleSet> sets) {
  if (sets.empty()) throw std::invalid_argument("nothing to pool");
  CosineSampleSet pooled{sets.front().dim, {}, sets.front().label};
  for (const auto& s : sets) {
    if (s.dim != pooled.dim || s.label != pooled.label) {
      throw std::invalid_argument("pooled runs must share dim and label");
    }
    pooled.values.insert(pooled.values.end(), s.values.begin(),
                         s.values.end());
  }
  return pooled;
}

}  // namespace canary_audit

#endif  // CANARY_AUDIT_SAMPLES_H_
