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

#ifndef CANARY_AUDIT_FEDERATED_H_
#define CANARY_AUDIT_FEDERATED_H_

// DP-FedAvg on a synthetic task with random canary clients.
//
// Each round the participating real clients send clipped updates, each
// scheduled canary sends its fixed direction scaled to the clip norm, Gaussian
// noise is added to the sum, and the noisy average drives a server momentum
// step. Canaries that never participate are tracked alongside as the null
// population.
//
// Several configurations that agree on everything the real clients see (seed,
// dimension, population, schedule, task) can be trained in lockstep. Client
// targets are then generated once per round and shared, and every
// configuration's result is identical to training it alone.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "canary_audit/errors.h"
#include "canary_audit/gaussian_epsilon.h"
#include "canary_audit/random.h"
#include "canary_audit/samples.h"
#include "canary_audit/sphere.h"

namespace canary_audit {

inline constexpr char kMeanPointTask[] = "mean-point";

struct FederatedConfig {
  std::size_t dim = 0;
  std::size_t total_clients = 0;
  std::size_t clients_per_round = 0;
  std::size_t rounds = 1;
  // Passes over the client population. Every client joins exactly one round
  // of each epoch.
  std::size_t epochs = 1;
  double noise_multiplier = 0.0;
  double clip_norm = 1.0;
  double server_lr = 1.0;
  double server_momentum = 0.0;
  std::size_t observed_canaries = 0;
  std::size_t unobserved_canaries = 0;
  std::size_t repetitions = 1;
  std::optional<double> delta;
  std::uint64_t seed = 0;
  // Seed for canary directions; the master seed when unset.
  std::optional<std::uint64_t> canary_seed;
  std::string task = kMeanPointTask;
  // Record per-round cosines for the all-iterates estimate.
  bool trace_all_rounds = false;

  // delta, or m^-1.1 when unset.
  double ResolvedDelta() const {
    if (delta) return *delta;
    if (total_clients == 0) {
      throw std::invalid_argument("delta must be set when there are no clients");
    }
    return std::pow(static_cast<double>(total_clients), -1.1);
  }

  std::uint64_t ResolvedCanarySeed() const {
    return canary_seed.value_or(seed);
  }

  // This configuration with delta and canary_seed filled in.
  FederatedConfig Resolved() const {
    FederatedConfig c = *this;
    c.delta = ResolvedDelta();
    c.canary_seed = ResolvedCanarySeed();
    return c;
  }

  // Smallest number of rounds in any epoch.
  std::size_t MinRoundsPerEpoch() const { return rounds / epochs; }

  void Validate() const {
    RequireSphereDim(dim);
    if (task != kMeanPointTask) {
      throw std::invalid_argument("unknown task '" + task + "'");
    }
    if (rounds == 0) throw std::invalid_argument("rounds must be positive");
    if (epochs == 0 || epochs > rounds) {
      throw std::invalid_argument("epochs must lie in [1, rounds]");
    }
    if (total_clients > 0 && clients_per_round == 0) {
      throw std::invalid_argument("clients_per_round must be positive");
    }
    if (clients_per_round > total_clients) {
      throw std::invalid_argument("clients_per_round exceeds total_clients");
    }
    if (clients_per_round * MinRoundsPerEpoch() < total_clients) {
      throw std::invalid_argument(
          "schedule infeasible: clients_per_round * rounds per epoch < "
          "total_clients");
    }
    if (!(noise_multiplier >= 0.0) || !std::isfinite(noise_multiplier)) {
      throw std::invalid_argument("noise_multiplier must be finite and >= 0");
    }
    if (!(clip_norm > 0.0) || !std::isfinite(clip_norm)) {
      throw std::invalid_argument("clip_norm must be finite and positive");
    }
    if (!(server_lr > 0.0) || !std::isfinite(server_lr)) {
      throw std::invalid_argument("server_lr must be finite and positive");
    }
    if (!(server_momentum >= 0.0 && server_momentum < 1.0)) {
      throw std::invalid_argument("server_momentum must lie in [0, 1)");
    }
    if (repetitions == 0 || repetitions > rounds) {
      throw std::invalid_argument("repetitions must lie in [1, rounds]");
    }
    if (delta && !(*delta > 0.0 && *delta < 1.0)) {
      throw std::invalid_argument("delta must lie strictly inside (0, 1)");
    }
    if (!delta && total_clients == 0) {
      throw std::invalid_argument("delta must be set when there are no clients");
    }
  }

  friend bool operator==(const FederatedConfig&,
                         const FederatedConfig&) = default;
};

// True when a and b can be trained in lockstep.
inline bool SharesClientSide(const FederatedConfig& a,
                             const FederatedConfig& b) {
  return a.dim == b.dim && a.total_clients == b.total_clients &&
         a.clients_per_round == b.clients_per_round && a.rounds == b.rounds &&
         a.epochs == b.epochs && a.seed == b.seed && a.task == b.task;
}

struct RoundAssignment {
  std::vector<std::uint32_t> clients;
  std::vector<std::uint32_t> canaries;
};

struct ParticipationSchedule {
  std::vector<RoundAssignment> rounds;
};

// Rounds in which observed canary i participates: r rounds spaced T/r apart,
// starting at offset i mod floor(T/r) so that canaries spread over rounds.
inline std::vector<std::size_t> CanaryRounds(std::size_t canary,
                                             std::size_t rounds,
                                             std::size_t repetitions) {
  if (repetitions == 0 || repetitions > rounds) {
    throw std::invalid_argument("repetitions must lie in [1, rounds]");
  }
  const std::size_t period = rounds / repetitions;
  const std::size_t offset = canary % period;
  std::vector<std::size_t> out(repetitions);
  for (std::size_t j = 0; j < repetitions; ++j) {
    out[j] = offset + j * rounds / repetitions;
  }
  return out;
}

// Fills the canary lists of an existing schedule with the observed canaries.
inline void AssignCanaries(const FederatedConfig& config,
                           ParticipationSchedule& schedule) {
  for (auto& r : schedule.rounds) r.canaries.clear();
  for (std::size_t i = 0; i < config.observed_canaries; ++i) {
    for (std::size_t t :
         CanaryRounds(i, schedule.rounds.size(), config.repetitions)) {
      schedule.rounds[t].canaries.push_back(static_cast<std::uint32_t>(i));
    }
  }
}

// Real clients are shuffled independently for each epoch and split as evenly
// as possible over that epoch's rounds.
inline ParticipationSchedule BuildSchedule(const FederatedConfig& config) {
  config.Validate();
  const std::size_t t_total = config.rounds;
  ParticipationSchedule schedule;
  schedule.rounds.resize(t_total);

  std::vector<std::uint32_t> order(config.total_clients);
  for (std::size_t e = 0; e < config.epochs; ++e) {
    const std::size_t first = e * t_total / config.epochs;
    const std::size_t last = (e + 1) * t_total / config.epochs;
    const std::size_t span_rounds = last - first;
    for (std::size_t j = 0; j < order.size(); ++j) {
      order[j] = static_cast<std::uint32_t>(j);
    }
    SubstreamRng rng(config.seed, StreamPurpose::kSchedule, e);
    for (std::size_t j = order.size(); j > 1; --j) {
      std::swap(order[j - 1], order[rng.NextBelow(j)]);
    }
    const std::size_t m = order.size();
    for (std::size_t t = 0; t < span_rounds; ++t) {
      const std::size_t lo = t * m / span_rounds;
      const std::size_t hi = (t + 1) * m / span_rounds;
      schedule.rounds[first + t].clients.assign(order.begin() + lo,
                                                order.begin() + hi);
    }
  }
  AssignCanaries(config, schedule);
  return schedule;
}

// Target w_j ~ N(0, I/d) of client j on the mean-point task.
inline void ClientTarget(std::uint64_t seed, std::size_t client,
                         std::span<double> out) {
  GaussianStream rng(seed, StreamPurpose::kClientTarget, client);
  rng.Fill(out);
  const double scale = 1.0 / std::sqrt(static_cast<double>(out.size()));
  for (double& v : out) v *= scale;
}

// Raw update of a client on the mean-point task: one unit-rate gradient step
// on 0.5 |model - w_j|^2, that is w_j - model.
inline std::vector<double> ClientUpdate(const FederatedConfig& config,
                                        std::size_t client,
                                        std::span<const double> model) {
  if (config.task != kMeanPointTask) {
    throw std::invalid_argument("unknown task '" + config.task + "'");
  }
  if (model.size() != config.dim) {
    throw std::invalid_argument("model has wrong dimension");
  }
  std::vector<double> update(config.dim);
  ClientTarget(config.seed, client, update);
  for (std::size_t j = 0; j < update.size(); ++j) update[j] -= model[j];
  return update;
}

// Clip(x; S) = x min(1, S/|x|).
inline void ClipInPlace(std::span<double> x, double clip_norm) {
  const double norm = Norm(x);
  if (norm > clip_norm) {
    const double scale = clip_norm / norm;
    for (double& v : x) v *= scale;
  }
}

inline void ObservedCanary(std::uint64_t canary_seed, std::size_t i,
                           std::span<double> out) {
  GaussianStream rng(canary_seed, StreamPurpose::kObservedCanary, i);
  SampleUnitSphereInto(out, rng);
}

inline void UnobservedCanary(std::uint64_t canary_seed, std::size_t i,
                             std::span<double> out) {
  GaussianStream rng(canary_seed, StreamPurpose::kUnobservedCanary, i);
  SampleUnitSphereInto(out, rng);
}

struct ModelState {
  std::vector<double> params;
  std::vector<double> momentum_buffer;
  std::size_t round = 0;

  friend bool operator==(const ModelState&, const ModelState&) = default;
};

struct RoundTrace {
  std::size_t round = 0;
  std::vector<double> observed_cosines;
  std::vector<double> unobserved_cosines;
  // The noisy average update was exactly zero; cosines were set to 0.
  bool zero_update = false;

  friend bool operator==(const RoundTrace&, const RoundTrace&) = default;
};

struct TrainingResult {
  ModelState final_model;
  CosineSampleSet observed_final;
  CosineSampleSet unobserved_final;
  std::vector<RoundTrace> traces;
  // The final model was exactly zero; final cosines were set to 0.
  bool zero_final_model = false;
  // Rounds skipped because nobody participated.
  std::size_t empty_rounds = 0;
};

// Per-canary maximum over rounds, for observed and unobserved canaries.
inline std::pair<CosineSampleSet, CosineSampleSet> MaxOverRounds(
    std::span<const RoundTrace> traces, std::size_t dim) {
  if (traces.empty()) throw std::invalid_argument("no round traces");
  const std::size_t n_obs = traces.front().observed_cosines.size();
  const std::size_t n_unobs = traces.front().unobserved_cosines.size();
  CosineSampleSet obs{dim, traces.front().observed_cosines,
                      SampleLabel::kObserved};
  CosineSampleSet unobs{dim, traces.front().unobserved_cosines,
                        SampleLabel::kUnobserved};
  for (const auto& tr : traces) {
    if (tr.observed_cosines.size() != n_obs ||
        tr.unobserved_cosines.size() != n_unobs) {
      throw std::invalid_argument("round traces have inconsistent shapes");
    }
    for (std::size_t i = 0; i < n_obs; ++i) {
      obs.values[i] = std::max(obs.values[i], tr.observed_cosines[i]);
    }
    for (std::size_t i = 0; i < n_unobs; ++i) {
      unobs.values[i] = std::max(unobs.values[i], tr.unobserved_cosines[i]);
    }
  }
  return {std::move(obs), std::move(unobs)};
}

namespace internal {

// Canary directions are held in memory when they fit in this many doubles,
// and regenerated from their substreams otherwise.
inline constexpr std::size_t kCanaryCacheLimit = std::size_t{1} << 26;

class CanarySource {
 public:
  CanarySource(std::uint64_t seed, bool observed, std::size_t count,
               std::size_t dim, bool cache)
      : seed_(seed), observed_(observed), count_(count), dim_(dim) {
    if (cache) {
      cache_.resize(count * dim);
      for (std::size_t i = 0; i < count; ++i) {
        Generate(i, std::span<double>(cache_.data() + i * dim, dim));
      }
    }
  }

  std::size_t size() const { return count_; }

  // Canary i, valid until the next call.
  std::span<const double> Get(std::size_t i) {
    if (!cache_.empty()) {
      return std::span<const double>(cache_.data() + i * dim_, dim_);
    }
    scratch_.resize(dim_);
    Generate(i, scratch_);
    return scratch_;
  }

 private:
  void Generate(std::size_t i, std::span<double> out) const {
    if (observed_) {
      ObservedCanary(seed_, i, out);
    } else {
      UnobservedCanary(seed_, i, out);
    }
  }

  std::uint64_t seed_;
  bool observed_;
  std::size_t count_;
  std::size_t dim_;
  std::vector<double> cache_;
  std::vector<double> scratch_;
};

inline void CosinesWith(CanarySource& canaries, std::span<const double> v,
                        double inv_norm, std::vector<double>& out) {
  out.resize(canaries.size());
  for (std::size_t i = 0; i < canaries.size(); ++i) {
    out[i] = inv_norm == 0.0
                 ? 0.0
                 : std::clamp(Dot(canaries.Get(i), v) * inv_norm, -1.0, 1.0);
  }
}

}  // namespace internal

// Trains every configuration in lockstep. All configurations must satisfy
// SharesClientSide with the first one. Result j is identical to
// RunTraining(configs[j]).
inline std::vector<TrainingResult> RunTrainingBatch(
    std::span<const FederatedConfig> configs) {
  if (configs.empty()) throw std::invalid_argument("no configurations");
  for (const auto& c : configs) {
    c.Validate();
    if (!SharesClientSide(c, configs.front())) {
      throw std::invalid_argument(
          "lockstep configurations must share seed, dim, clients, rounds, "
          "epochs and task");
    }
  }
  const FederatedConfig& base = configs.front();
  const std::size_t d = base.dim;
  const std::size_t n_cfg = configs.size();
  const ParticipationSchedule schedule = BuildSchedule(base);
  std::vector<ParticipationSchedule> canary_schedules(n_cfg);
  for (std::size_t c = 0; c < n_cfg; ++c) {
    canary_schedules[c].rounds.resize(schedule.rounds.size());
    AssignCanaries(configs[c], canary_schedules[c]);
  }

  // Canary populations are shared between configurations with the same seed.
  std::size_t cached_doubles = 0;
  std::map<std::pair<std::uint64_t, bool>, internal::CanarySource> sources;
  auto source_for = [&](const FederatedConfig& c, bool observed,
                        std::size_t count) -> internal::CanarySource& {
    const auto key = std::make_pair(c.ResolvedCanarySeed(), observed);
    auto it = sources.find(key);
    if (it == sources.end()) {
      std::size_t want = count;
      for (const auto& o : configs) {
        if (o.ResolvedCanarySeed() == key.first) {
          want = std::max(want, observed ? o.observed_canaries
                                         : o.unobserved_canaries);
        }
      }
      const bool cache =
          cached_doubles + want * d <= internal::kCanaryCacheLimit;
      if (cache) cached_doubles += want * d;
      it = sources
               .emplace(key, internal::CanarySource(key.first, observed, want,
                                                    d, cache))
               .first;
    }
    return it->second;
  };
  std::vector<internal::CanarySource*> observed(n_cfg);
  std::vector<internal::CanarySource*> unobserved(n_cfg);
  for (std::size_t c = 0; c < n_cfg; ++c) {
    observed[c] = &source_for(configs[c], true, configs[c].observed_canaries);
  }
  for (std::size_t c = 0; c < n_cfg; ++c) {
    unobserved[c] =
        &source_for(configs[c], false, configs[c].unobserved_canaries);
  }

  std::vector<TrainingResult> results(n_cfg);
  for (auto& r : results) {
    r.final_model.params.assign(d, 0.0);
    r.final_model.momentum_buffer.assign(d, 0.0);
  }
  std::vector<std::vector<double>> aggregate(n_cfg, std::vector<double>(d));
  std::vector<double> clip_weight_sum(n_cfg);
  std::vector<double> param_sq(n_cfg, 0.0);
  std::vector<double> target(d);
  std::vector<double> noise(d);
  std::vector<double> trace_scratch;

  for (std::size_t t = 0; t < schedule.rounds.size(); ++t) {
    const RoundAssignment& round = schedule.rounds[t];
    for (std::size_t c = 0; c < n_cfg; ++c) {
      std::fill(aggregate[c].begin(), aggregate[c].end(), 0.0);
      clip_weight_sum[c] = 0.0;
    }

    // Sum_j Clip(w_j - theta) = Sum_j s_j w_j - (Sum_j s_j) theta.
    for (std::uint32_t client : round.clients) {
      ClientTarget(base.seed, client, target);
      const double target_sq = Dot(target, target);
      for (std::size_t c = 0; c < n_cfg; ++c) {
        const auto& theta = results[c].final_model.params;
        const double update_sq = std::max(
            0.0, target_sq - 2.0 * Dot(target, theta) + param_sq[c]);
        const double norm = std::sqrt(update_sq);
        const double s = norm > configs[c].clip_norm
                             ? configs[c].clip_norm / norm
                             : 1.0;
        auto& agg = aggregate[c];
        for (std::size_t j = 0; j < d; ++j) agg[j] += s * target[j];
        clip_weight_sum[c] += s;
      }
    }

    bool noise_drawn = false;
    for (std::size_t c = 0; c < n_cfg; ++c) {
      const FederatedConfig& cfg = configs[c];
      TrainingResult& res = results[c];
      ModelState& model = res.final_model;
      const auto& round_canaries = canary_schedules[c].rounds[t].canaries;
      const std::size_t n = round.clients.size() + round_canaries.size();
      if (n == 0) {
        ++res.empty_rounds;
        continue;
      }

      auto& rho = aggregate[c];
      const double w = clip_weight_sum[c];
      if (w != 0.0) {
        for (std::size_t j = 0; j < d; ++j) rho[j] -= w * model.params[j];
      }
      for (std::uint32_t i : round_canaries) {
        const auto canary = observed[c]->Get(i);
        for (std::size_t j = 0; j < d; ++j) rho[j] += cfg.clip_norm * canary[j];
      }
      const double noise_std = cfg.noise_multiplier * cfg.clip_norm;
      if (noise_std > 0.0) {
        if (!noise_drawn) {
          GaussianStream rng(base.seed, StreamPurpose::kRoundNoise, t);
          rng.Fill(noise);
          noise_drawn = true;
        }
        for (std::size_t j = 0; j < d; ++j) rho[j] += noise_std * noise[j];
      }
      const double inv_n = 1.0 / static_cast<double>(n);
      for (double& v : rho) v *= inv_n;

      if (cfg.trace_all_rounds) {
        const double rho_norm = Norm(rho);
        const double inv = rho_norm > 0.0 ? 1.0 / rho_norm : 0.0;
        RoundTrace tr;
        tr.round = t;
        tr.zero_update = rho_norm == 0.0;
        internal::CosinesWith(*observed[c], rho, inv, trace_scratch);
        tr.observed_cosines.assign(trace_scratch.begin(),
                                   trace_scratch.begin() +
                                       static_cast<std::ptrdiff_t>(
                                           cfg.observed_canaries));
        internal::CosinesWith(*unobserved[c], rho, inv, trace_scratch);
        tr.unobserved_cosines.assign(trace_scratch.begin(),
                                     trace_scratch.begin() +
                                         static_cast<std::ptrdiff_t>(
                                             cfg.unobserved_canaries));
        res.traces.push_back(std::move(tr));
      }

      const double beta = cfg.server_momentum;
      const double lr = cfg.server_lr;
      auto& buf = model.momentum_buffer;
      auto& theta = model.params;
      double sq = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        buf[j] = beta * buf[j] + rho[j];
        theta[j] += lr * buf[j];
        sq += theta[j] * theta[j];
      }
      if (!std::isfinite(sq)) {
        throw AbortedRunError(t, "model became non-finite");
      }
      param_sq[c] = sq;
      model.round = t + 1;
    }
  }

  for (std::size_t c = 0; c < n_cfg; ++c) {
    const FederatedConfig& cfg = configs[c];
    TrainingResult& res = results[c];
    res.final_model.round = schedule.rounds.size();
    const auto& theta = res.final_model.params;
    const double norm = Norm(theta);
    res.zero_final_model = norm == 0.0;
    const double inv = norm > 0.0 ? 1.0 / norm : 0.0;
    res.observed_final = {d, {}, SampleLabel::kObserved};
    res.unobserved_final = {d, {}, SampleLabel::kUnobserved};
    internal::CosinesWith(*observed[c], theta, inv, trace_scratch);
    res.observed_final.values.assign(
        trace_scratch.begin(),
        trace_scratch.begin() +
            static_cast<std::ptrdiff_t>(cfg.observed_canaries));
    internal::CosinesWith(*unobserved[c], theta, inv, trace_scratch);
    res.unobserved_final.values.assign(
        trace_scratch.begin(),
        trace_scratch.begin() +
            static_cast<std::ptrdiff_t>(cfg.unobserved_canaries));
  }
  return results;
}

inline TrainingResult RunTraining(const FederatedConfig& config) {
  return std::move(RunTrainingBatch(std::span(&config, 1)).front());
}

// Mean-point training loss (1/m) Sum_j 0.5 |theta - w_j|^2 over all clients.
inline double MeanPointLoss(const FederatedConfig& config,
                            std::span<const double> theta) {
  if (config.total_clients == 0) {
    throw std::invalid_argument("loss needs at least one client");
  }
  if (theta.size() != config.dim) {
    throw std::invalid_argument("model has wrong dimension");
  }
  std::vector<double> target(config.dim);
  const double theta_sq = Dot(theta, theta);
  double total = 0.0;
  for (std::size_t j = 0; j < config.total_clients; ++j) {
    ClientTarget(config.seed, j, target);
    total += 0.5 * (Dot(target, target) - 2.0 * Dot(target, theta) + theta_sq);
  }
  return total / static_cast<double>(config.total_clients);
}

}  // namespace canary_audit

#endif  // CANARY_AUDIT_FEDERATED_H_
