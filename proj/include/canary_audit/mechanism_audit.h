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

#ifndef CANARY_AUDIT_MECHANISM_AUDIT_H_
#define CANARY_AUDIT_MECHANISM_AUDIT_H_

// One-shot audit of a single Gaussian vector-sum release.
//
// k canaries c_i are drawn uniformly from the sphere and added to the data sum
// X; the mechanism releases rho = X + sum_i c_i + sigma Z once. Each canary
// contributes the cosine g_i = <c_i, rho>/|rho|, a Gaussian is fitted to the
// g_i, and epsilon is computed against the null N(0, 1/d).
//
// The canaries are never held in memory together. Pass one accumulates
// B = X + sum_i c_i; pass two regenerates each canary from its substream and
// records <c_i, B> and <c_i, Z>. Since rho = B + sigma Z, the cosines for any
// noise scale follow from those projections and |B|^2, <B, Z>, |Z|^2.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "canary_audit/errors.h"
#include "canary_audit/estimators.h"
#include "canary_audit/gaussian.h"
#include "canary_audit/random.h"
#include "canary_audit/samples.h"
#include "canary_audit/sphere.h"

namespace canary_audit {

struct GaussianSumInstance {
  std::size_t dim = 0;
  // Individual records x_j, each with norm <= 1.
  std::vector<std::vector<double>> data_vectors;
  // Alternatively, a precomputed sum of records.
  std::optional<std::vector<double>> data_sum;
  double noise_std = 0.0;
  std::size_t canary_count = 0;
  double delta = 1e-6;
  std::uint64_t seed = 0;
  AlternateVariance alternate_variance = AlternateVariance::kFitted;

  void Validate() const {
    RequireSphereDim(dim);
    if (canary_count < 2) {
      throw std::invalid_argument("need at least 2 canaries");
    }
    if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) {
      throw std::invalid_argument("noise_std must be finite and nonnegative");
    }
    internal::RequireDelta(delta);
    for (const auto& x : data_vectors) {
      if (x.size() != dim) {
        throw std::invalid_argument("data vector has wrong dimension");
      }
      if (Norm(x) > 1.0 + 1e-9) {
        throw std::invalid_argument("data vector norm exceeds 1");
      }
    }
    if (data_sum && data_sum->size() != dim) {
      throw std::invalid_argument("data sum has wrong dimension");
    }
  }

  friend bool operator==(const GaussianSumInstance&,
                         const GaussianSumInstance&) = default;
};

struct GaussianAuditResult {
  EpsilonEstimate epsilon;
  CosineSampleSet samples;
  GaussianHypothesis fitted;
};

// Everything about one draw of canaries and noise that the cosines depend on.
struct CanaryProjections {
  std::size_t dim = 0;
  std::vector<double> onto_signal;  // <c_i, B>
  std::vector<double> onto_noise;   // <c_i, Z>
  double signal_sq = 0.0;           // |B|^2
  double signal_noise = 0.0;        // <B, Z>
  double noise_sq = 0.0;            // |Z|^2

  // Cosines g_i = <c_i, B + sigma Z> / |B + sigma Z|.
  CosineSampleSet Cosines(double noise_std) const {
    const double release_sq = signal_sq + 2.0 * noise_std * signal_noise +
                              noise_std * noise_std * noise_sq;
    if (!(release_sq > 0.0)) {
      throw DegenerateReleaseError("released vector has zero norm");
    }
    const double inv_norm = 1.0 / std::sqrt(release_sq);
    CosineSampleSet out{dim, std::vector<double>(onto_signal.size()),
                        SampleLabel::kObserved};
    for (std::size_t i = 0; i < onto_signal.size(); ++i) {
      const double g = (onto_signal[i] + noise_std * onto_noise[i]) * inv_norm;
      out.values[i] = std::clamp(g, -1.0, 1.0);
    }
    return out;
  }
};

// Canary i of an audit seeded with `seed`, written into `out`.
inline void MechanismCanary(std::uint64_t seed, std::size_t i,
                            std::span<double> out) {
  GaussianStream rng(seed, StreamPurpose::kMechanismCanary, i);
  SampleUnitSphereInto(out, rng);
}

inline CanaryProjections ProjectCanaries(const GaussianSumInstance& instance) {
  instance.Validate();
  const std::size_t d = instance.dim;
  std::vector<double> signal(d, 0.0);
  if (instance.data_sum) signal = *instance.data_sum;
  for (const auto& x : instance.data_vectors) {
    for (std::size_t j = 0; j < d; ++j) signal[j] += x[j];
  }

  std::vector<double> canary(d);
  for (std::size_t i = 0; i < instance.canary_count; ++i) {
    MechanismCanary(instance.seed, i, canary);
    for (std::size_t j = 0; j < d; ++j) signal[j] += canary[j];
  }

  std::vector<double> noise(d);
  GaussianStream noise_rng(instance.seed, StreamPurpose::kMechanismNoise, 0);
  noise_rng.Fill(noise);

  CanaryProjections p;
  p.dim = d;
  p.signal_sq = Dot(signal, signal);
  p.signal_noise = Dot(signal, noise);
  p.noise_sq = Dot(noise, noise);
  p.onto_signal.resize(instance.canary_count);
  p.onto_noise.resize(instance.canary_count);
  for (std::size_t i = 0; i < instance.canary_count; ++i) {
    MechanismCanary(instance.seed, i, canary);
    p.onto_signal[i] = Dot(canary, signal);
    p.onto_noise[i] = Dot(canary, noise);
  }
  return p;
}

inline GaussianAuditResult AuditFromCosines(
    CosineSampleSet samples, double delta,
    AlternateVariance mode = AlternateVariance::kFitted) {
  GaussianAuditResult result;
  result.fitted = FitGaussianMoments(samples);
  result.epsilon = EstimateEpsilonFinal(samples, samples.dim, delta, mode);
  result.samples = std::move(samples);
  return result;
}

// Audits the same canary and noise draw at several noise scales. Entry j is
// exactly what RunGaussianMechanismAudit returns for noise_std = scales[j].
inline std::vector<GaussianAuditResult> RunGaussianMechanismAuditSweep(
    const GaussianSumInstance& instance, std::span<const double> scales) {
  for (double s : scales) {
    if (!(s >= 0.0) || !std::isfinite(s)) {
      throw std::invalid_argument("noise scales must be finite and nonnegative");
    }
  }
  const CanaryProjections p = ProjectCanaries(instance);
  std::vector<GaussianAuditResult> results;
  results.reserve(scales.size());
  for (double s : scales) {
    results.push_back(AuditFromCosines(p.Cosines(s), instance.delta,
                                       instance.alternate_variance));
  }
  return results;
}

inline GaussianAuditResult RunGaussianMechanismAudit(
    const GaussianSumInstance& instance) {
  const double scale = instance.noise_std;
  return std::move(
      RunGaussianMechanismAuditSweep(instance, std::span(&scale, 1)).front());
}

}  // namespace canary_audit

#endif  // CANARY_AUDIT_MECHANISM_AUDIT_H_
