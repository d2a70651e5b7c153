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

#ifndef CANARY_AUDIT_REPORT_H_
#define CANARY_AUDIT_REPORT_H_

// Configuration files, audit reports and cosine tables.
//
// Configurations and reports are JSON. Configuration keys mirror the C++ field
// names and unknown keys are rejected. JSON has no infinity, so infinite
// reals are written as the string "inf". Cosine tables are CSV with header
// round,canary_id,label,cosine, where round -1 marks final-model cosines.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <variant>
#include <vector>

#include <unistd.h>

#include "json.hpp"

#include "canary_audit/errors.h"
#include "canary_audit/estimators.h"
#include "canary_audit/federated.h"
#include "canary_audit/gaussian.h"
#include "canary_audit/mechanism_audit.h"
#include "canary_audit/samples.h"

namespace canary_audit {

inline constexpr char kToolkitVersion[] = "0.1.0";

using Json = nlohmann::json;

// A configuration or report that does not match its schema. `keys` names the
// offending fields.
class SchemaError : public std::invalid_argument {
 public:
  SchemaError(const std::string& what, std::vector<std::string> keys)
      : std::invalid_argument(what), keys_(std::move(keys)) {}

  const std::vector<std::string>& keys() const { return keys_; }

 private:
  std::vector<std::string> keys_;
};

namespace internal {

inline Json EncodeReal(double v) {
  if (std::isnan(v)) throw std::domain_error("cannot serialize NaN");
  if (std::isinf(v)) return v > 0.0 ? Json("inf") : Json("-inf");
  return Json(v);
}

inline double DecodeReal(const Json& j, const std::string& key) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
  }
  throw SchemaError("field '" + key + "' must be a number", {key});
}

inline std::uint64_t DecodeUnsigned(const Json& j, const std::string& key) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<std::int64_t>() >= 0) {
    return static_cast<std::uint64_t>(j.get<std::int64_t>());
  }
  throw SchemaError("field '" + key + "' must be a nonnegative integer", {key});
}

inline bool DecodeBool(const Json& j, const std::string& key) {
  if (!j.is_boolean()) {
    throw SchemaError("field '" + key + "' must be a boolean", {key});
  }
  return j.get<bool>();
}

inline std::string DecodeString(const Json& j, const std::string& key) {
  if (!j.is_string()) {
    throw SchemaError("field '" + key + "' must be a string", {key});
  }
  return j.get<std::string>();
}

// Rejects non-objects, unknown keys and missing required keys.
inline void CheckKeys(const Json& j, const std::set<std::string>& allowed,
                      const std::set<std::string>& required,
                      std::string_view what) {
  if (!j.is_object()) {
    throw SchemaError(std::string(what) + " must be a JSON object", {});
  }
  std::vector<std::string> unknown;
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) unknown.push_back(key);
  }
  if (!unknown.empty()) {
    std::string msg = "unknown " + std::string(what) + " keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw SchemaError(msg, unknown);
  }
  std::vector<std::string> missing;
  for (const auto& key : required) {
    if (!j.contains(key)) missing.push_back(key);
  }
  if (!missing.empty()) {
    std::string msg = "missing " + std::string(what) + " keys:";
    for (const auto& k : missing) msg += " " + k;
    throw SchemaError(msg, missing);
  }
}

inline bool Present(const Json& j, const char* key) {
  return j.contains(key) && !j.at(key).is_null();
}

}  // namespace internal

// Federated configurations ---------------------------------------------------

// The resolved configuration: delta and canary_seed are always written.
inline Json ToJson(const FederatedConfig& c) {
  return Json{
      {"dim", c.dim},
      {"total_clients", c.total_clients},
      {"clients_per_round", c.clients_per_round},
      {"rounds", c.rounds},
      {"epochs", c.epochs},
      {"noise_multiplier", c.noise_multiplier},
      {"clip_norm", c.clip_norm},
      {"server_lr", c.server_lr},
      {"server_momentum", c.server_momentum},
      {"observed_canaries", c.observed_canaries},
      {"unobserved_canaries", c.unobserved_canaries},
      {"repetitions", c.repetitions},
      {"delta", c.ResolvedDelta()},
      {"seed", c.seed},
      {"canary_seed", c.ResolvedCanarySeed()},
      {"task", c.task},
      {"trace_all_rounds", c.trace_all_rounds},
  };
}

inline FederatedConfig FederatedConfigFromJson(const Json& j) {
  using internal::DecodeUnsigned;
  using internal::DecodeReal;
  internal::CheckKeys(
      j,
      {"dim", "total_clients", "clients_per_round", "rounds", "epochs",
       "noise_multiplier", "clip_norm", "server_lr", "server_momentum",
       "observed_canaries", "unobserved_canaries", "repetitions", "delta",
       "seed", "canary_seed", "task", "trace_all_rounds"},
      {"dim", "total_clients", "clients_per_round", "rounds"}, "config");
  FederatedConfig c;
  c.dim = DecodeUnsigned(j.at("dim"), "dim");
  c.total_clients = DecodeUnsigned(j.at("total_clients"), "total_clients");
  c.clients_per_round =
      DecodeUnsigned(j.at("clients_per_round"), "clients_per_round");
  c.rounds = DecodeUnsigned(j.at("rounds"), "rounds");
  if (j.contains("epochs")) c.epochs = DecodeUnsigned(j.at("epochs"), "epochs");
  if (j.contains("noise_multiplier")) {
    c.noise_multiplier = DecodeReal(j.at("noise_multiplier"), "noise_multiplier");
  }
  if (j.contains("clip_norm")) {
    c.clip_norm = DecodeReal(j.at("clip_norm"), "clip_norm");
  }
  if (j.contains("server_lr")) {
    c.server_lr = DecodeReal(j.at("server_lr"), "server_lr");
  }
  if (j.contains("server_momentum")) {
    c.server_momentum = DecodeReal(j.at("server_momentum"), "server_momentum");
  }
  if (j.contains("observed_canaries")) {
    c.observed_canaries =
        DecodeUnsigned(j.at("observed_canaries"), "observed_canaries");
  }
  if (j.contains("unobserved_canaries")) {
    c.unobserved_canaries =
        DecodeUnsigned(j.at("unobserved_canaries"), "unobserved_canaries");
  }
  if (j.contains("repetitions")) {
    c.repetitions = DecodeUnsigned(j.at("repetitions"), "repetitions");
  }
  if (internal::Present(j, "delta")) {
    c.delta = DecodeReal(j.at("delta"), "delta");
  }
  if (j.contains("seed")) c.seed = DecodeUnsigned(j.at("seed"), "seed");
  if (internal::Present(j, "canary_seed")) {
    c.canary_seed = DecodeUnsigned(j.at("canary_seed"), "canary_seed");
  }
  if (j.contains("task")) c.task = internal::DecodeString(j.at("task"), "task");
  if (j.contains("trace_all_rounds")) {
    c.trace_all_rounds =
        internal::DecodeBool(j.at("trace_all_rounds"), "trace_all_rounds");
  }
  try {
    c.Validate();
  } catch (const std::invalid_argument& e) {
    throw SchemaError(std::string("invalid config: ") + e.what(), {});
  }
  return c;
}

// Gaussian mechanism instances -----------------------------------------------

inline Json ToJson(const GaussianSumInstance& g) {
  Json j{
      {"dim", g.dim},
      {"noise_std", g.noise_std},
      {"canary_count", g.canary_count},
      {"delta", g.delta},
      {"seed", g.seed},
      {"alternate_variance",
       std::string(AlternateVarianceName(g.alternate_variance))},
  };
  if (!g.data_vectors.empty()) j["data_vectors"] = g.data_vectors;
  if (g.data_sum) j["data_sum"] = *g.data_sum;
  return j;
}

inline GaussianSumInstance GaussianSumInstanceFromJson(const Json& j) {
  internal::CheckKeys(j,
                      {"dim", "noise_std", "canary_count", "delta", "seed",
                       "alternate_variance", "data_vectors", "data_sum"},
                      {"dim", "noise_std", "canary_count", "delta"},
                      "instance");
  GaussianSumInstance g;
  g.dim = internal::DecodeUnsigned(j.at("dim"), "dim");
  g.noise_std = internal::DecodeReal(j.at("noise_std"), "noise_std");
  g.canary_count = internal::DecodeUnsigned(j.at("canary_count"), "canary_count");
  g.delta = internal::DecodeReal(j.at("delta"), "delta");
  if (j.contains("seed")) g.seed = internal::DecodeUnsigned(j.at("seed"), "seed");
  if (j.contains("alternate_variance")) {
    try {
      g.alternate_variance = ParseAlternateVariance(
          internal::DecodeString(j.at("alternate_variance"), "alternate_variance"));
    } catch (const SchemaError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      throw SchemaError(e.what(), {"alternate_variance"});
    }
  }
  try {
    if (j.contains("data_vectors")) {
      g.data_vectors = j.at("data_vectors").get<std::vector<std::vector<double>>>();
    }
    if (internal::Present(j, "data_sum")) {
      g.data_sum = j.at("data_sum").get<std::vector<double>>();
    }
  } catch (const Json::exception&) {
    throw SchemaError("data vectors must be arrays of numbers",
                      {"data_vectors"});
  }
  try {
    g.Validate();
  } catch (const std::invalid_argument& e) {
    throw SchemaError(std::string("invalid instance: ") + e.what(), {});
  }
  return g;
}

// Reports --------------------------------------------------------------------

struct NullModelDescriptor {
  std::string kind;  // "exact", "gaussian" or "empirical"
  std::size_t dim = 0;
  // Gaussian summary of the null: N(0, 1/d) for the analytic nulls, the
  // fitted unobserved cosines for an empirical null.
  GaussianHypothesis moments;

  friend bool operator==(const NullModelDescriptor&,
                         const NullModelDescriptor&) = default;
};

struct AuditReport {
  std::string kind;  // "gauss-audit" or "fl-audit"
  std::variant<GaussianSumInstance, FederatedConfig> config_echo;
  std::size_t runs = 1;
  double delta = 0.0;
  AlternateVariance alternate_variance = AlternateVariance::kFitted;
  std::size_t sample_count = 0;
  EpsilonEstimate epsilon_estimate;
  std::optional<EpsilonEstimate> epsilon_all_iterates;
  EpsilonLowerBound epsilon_lower_bound;
  std::optional<EpsilonLowerBound> epsilon_lower_bound_all_iterates;
  GaussianHypothesis fitted_observed;
  std::optional<GaussianHypothesis> fitted_unobserved;
  NullModelDescriptor null_model;
  std::optional<NormalityDiagnostic> normality;
  std::vector<std::string> warnings;
  double runtime_seconds = 0.0;
  std::string toolkit_version = kToolkitVersion;

  friend bool operator==(const AuditReport&, const AuditReport&) = default;
};

inline constexpr char kEstimateNote[] =
    "epsilon_estimate and epsilon_all_iterates are empirical estimates under "
    "the random-canary cosine attack, not certified upper bounds; "
    "epsilon_lower_bound is a one-sided bound at the stated confidence, "
    "optimistic by the choice of the best threshold";

namespace internal {

inline Json ToJson(const EpsilonEstimate& e) {
  return Json{{"value", EncodeReal(e.value)},
              {"saturated", e.saturated},
              {"degenerate_fit", e.degenerate_fit}};
}

inline EpsilonEstimate EstimateFromJson(const Json& j, const std::string& key) {
  CheckKeys(j, {"value", "saturated", "degenerate_fit"},
            {"value", "saturated", "degenerate_fit"}, key);
  return {DecodeReal(j.at("value"), key + ".value"),
          DecodeBool(j.at("saturated"), key + ".saturated"),
          DecodeBool(j.at("degenerate_fit"), key + ".degenerate_fit")};
}

inline Json ToJson(const EpsilonLowerBound& b) {
  return Json{{"value", EncodeReal(b.value)},
              {"confidence", b.confidence},
              {"threshold_used", EncodeReal(b.threshold_used)},
              {"fpr", b.fpr},
              {"fnr_upper", b.fnr_upper}};
}

inline EpsilonLowerBound LowerBoundFromJson(const Json& j,
                                            const std::string& key) {
  const std::set<std::string> keys{"value", "confidence", "threshold_used",
                                   "fpr", "fnr_upper"};
  CheckKeys(j, keys, keys, key);
  EpsilonLowerBound b;
  b.value = DecodeReal(j.at("value"), key + ".value");
  b.confidence = DecodeReal(j.at("confidence"), key + ".confidence");
  b.threshold_used = DecodeReal(j.at("threshold_used"), key + ".threshold_used");
  b.fpr = DecodeReal(j.at("fpr"), key + ".fpr");
  b.fnr_upper = DecodeReal(j.at("fnr_upper"), key + ".fnr_upper");
  return b;
}

inline Json ToJson(const GaussianHypothesis& g) {
  return Json{{"mean", EncodeReal(g.mean)}, {"std", EncodeReal(g.std)}};
}

inline GaussianHypothesis HypothesisFromJson(const Json& j,
                                             const std::string& key) {
  CheckKeys(j, {"mean", "std"}, {"mean", "std"}, key);
  return {DecodeReal(j.at("mean"), key + ".mean"),
          DecodeReal(j.at("std"), key + ".std")};
}

inline Json ToJson(const NormalityDiagnostic& n) {
  return Json{{"ad_statistic", EncodeReal(n.ad_statistic)},
              {"reject_1pct", n.reject_1pct},
              {"reject_15pct", n.reject_15pct}};
}

inline NormalityDiagnostic NormalityFromJson(const Json& j) {
  const std::set<std::string> keys{"ad_statistic", "reject_1pct",
                                   "reject_15pct"};
  CheckKeys(j, keys, keys, "normality");
  return {DecodeReal(j.at("ad_statistic"), "normality.ad_statistic"),
          DecodeBool(j.at("reject_1pct"), "normality.reject_1pct"),
          DecodeBool(j.at("reject_15pct"), "normality.reject_15pct")};
}

template <typename T, typename F>
Json OptionalToJson(const std::optional<T>& v, F encode) {
  return v ? encode(*v) : Json(nullptr);
}

}  // namespace internal

inline Json ToJson(const AuditReport& r) {
  using internal::EncodeReal;
  Json config = std::visit([](const auto& c) { return ToJson(c); },
                           r.config_echo);
  auto est = [](const EpsilonEstimate& e) { return internal::ToJson(e); };
  auto lo = [](const EpsilonLowerBound& b) { return internal::ToJson(b); };
  auto hyp = [](const GaussianHypothesis& g) { return internal::ToJson(g); };
  auto norm = [](const NormalityDiagnostic& n) { return internal::ToJson(n); };
  return Json{
      {"kind", r.kind},
      {"config_echo", std::move(config)},
      {"runs", r.runs},
      {"delta", r.delta},
      {"alternate_variance",
       std::string(AlternateVarianceName(r.alternate_variance))},
      {"sample_count", r.sample_count},
      {"epsilon_estimate", est(r.epsilon_estimate)},
      {"epsilon_all_iterates",
       internal::OptionalToJson(r.epsilon_all_iterates, est)},
      {"epsilon_lower_bound", lo(r.epsilon_lower_bound)},
      {"epsilon_lower_bound_all_iterates",
       internal::OptionalToJson(r.epsilon_lower_bound_all_iterates, lo)},
      {"fitted_observed", hyp(r.fitted_observed)},
      {"fitted_unobserved", internal::OptionalToJson(r.fitted_unobserved, hyp)},
      {"null_model",
       Json{{"kind", r.null_model.kind},
            {"dim", r.null_model.dim},
            {"moments", hyp(r.null_model.moments)}}},
      {"normality", internal::OptionalToJson(r.normality, norm)},
      {"warnings", r.warnings},
      {"note", kEstimateNote},
      {"runtime_seconds", EncodeReal(r.runtime_seconds)},
      {"toolkit_version", r.toolkit_version},
  };
}

inline AuditReport AuditReportFromJson(const Json& j) {
  using internal::Present;
  const std::set<std::string> keys{
      "kind", "config_echo", "runs", "delta", "alternate_variance",
      "sample_count", "epsilon_estimate", "epsilon_all_iterates",
      "epsilon_lower_bound", "epsilon_lower_bound_all_iterates",
      "fitted_observed", "fitted_unobserved", "null_model", "normality",
      "warnings", "note", "runtime_seconds", "toolkit_version"};
  internal::CheckKeys(j, keys,
                      {"kind", "config_echo", "epsilon_estimate",
                       "epsilon_lower_bound", "fitted_observed", "null_model"},
                      "report");
  AuditReport r;
  r.kind = internal::DecodeString(j.at("kind"), "kind");
  if (r.kind == "gauss-audit") {
    r.config_echo = GaussianSumInstanceFromJson(j.at("config_echo"));
  } else if (r.kind == "fl-audit") {
    r.config_echo = FederatedConfigFromJson(j.at("config_echo"));
  } else {
    throw SchemaError("unknown report kind '" + r.kind + "'", {"kind"});
  }
  if (j.contains("runs")) r.runs = internal::DecodeUnsigned(j.at("runs"), "runs");
  if (j.contains("delta")) r.delta = internal::DecodeReal(j.at("delta"), "delta");
  if (j.contains("alternate_variance")) {
    r.alternate_variance = ParseAlternateVariance(
        internal::DecodeString(j.at("alternate_variance"), "alternate_variance"));
  }
  if (j.contains("sample_count")) {
    r.sample_count = internal::DecodeUnsigned(j.at("sample_count"), "sample_count");
  }
  r.epsilon_estimate =
      internal::EstimateFromJson(j.at("epsilon_estimate"), "epsilon_estimate");
  if (Present(j, "epsilon_all_iterates")) {
    r.epsilon_all_iterates = internal::EstimateFromJson(
        j.at("epsilon_all_iterates"), "epsilon_all_iterates");
  }
  r.epsilon_lower_bound = internal::LowerBoundFromJson(
      j.at("epsilon_lower_bound"), "epsilon_lower_bound");
  if (Present(j, "epsilon_lower_bound_all_iterates")) {
    r.epsilon_lower_bound_all_iterates = internal::LowerBoundFromJson(
        j.at("epsilon_lower_bound_all_iterates"),
        "epsilon_lower_bound_all_iterates");
  }
  r.fitted_observed =
      internal::HypothesisFromJson(j.at("fitted_observed"), "fitted_observed");
  if (Present(j, "fitted_unobserved")) {
    r.fitted_unobserved = internal::HypothesisFromJson(
        j.at("fitted_unobserved"), "fitted_unobserved");
  }
  const Json& null = j.at("null_model");
  internal::CheckKeys(null, {"kind", "dim", "moments"},
                      {"kind", "dim", "moments"}, "null_model");
  r.null_model.kind = internal::DecodeString(null.at("kind"), "null_model.kind");
  r.null_model.dim = internal::DecodeUnsigned(null.at("dim"), "null_model.dim");
  r.null_model.moments =
      internal::HypothesisFromJson(null.at("moments"), "null_model.moments");
  if (Present(j, "normality")) {
    r.normality = internal::NormalityFromJson(j.at("normality"));
  }
  if (j.contains("warnings")) {
    try {
      r.warnings = j.at("warnings").get<std::vector<std::string>>();
    } catch (const Json::exception&) {
      throw SchemaError("warnings must be a list of strings", {"warnings"});
    }
  }
  if (j.contains("runtime_seconds")) {
    r.runtime_seconds =
        internal::DecodeReal(j.at("runtime_seconds"), "runtime_seconds");
  }
  if (j.contains("toolkit_version")) {
    r.toolkit_version =
        internal::DecodeString(j.at("toolkit_version"), "toolkit_version");
  }
  return r;
}

// Serialized report, two-space indented, keys sorted.
inline std::string SerializeReport(const AuditReport& r) {
  return ToJson(r).dump(2) + "\n";
}

inline AuditReport ParseReport(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw SchemaError(std::string("malformed JSON: ") + e.what(), {});
  }
  return AuditReportFromJson(j);
}

// Report assembly --------------------------------------------------------------

namespace internal {

inline NullModelDescriptor DescribeNull(const NullModel& null,
                                        const GaussianHypothesis& moments) {
  return {std::string(null.Name()), null.dim(), moments};
}

// Anderson-Darling on the observed cosines, or nothing when it is undefined.
inline std::optional<NormalityDiagnostic> TryNormality(
    const CosineSampleSet& samples, std::vector<std::string>& warnings) {
  if (samples.size() < 8) {
    warnings.push_back("normality test skipped: fewer than 8 samples");
    return std::nullopt;
  }
  try {
    return AndersonDarling(samples.values);
  } catch (const DegenerateInputError&) {
    warnings.push_back("normality test skipped: samples have zero spread");
    return std::nullopt;
  }
}

}  // namespace internal

inline AuditReport BuildGaussReport(const GaussianSumInstance& instance,
                                    const GaussianAuditResult& result,
                                    double runtime_seconds) {
  AuditReport r;
  r.kind = "gauss-audit";
  r.config_echo = instance;
  r.delta = instance.delta;
  r.alternate_variance = instance.alternate_variance;
  r.sample_count = result.samples.size();
  r.epsilon_estimate = result.epsilon;
  r.fitted_observed = result.fitted;
  const NullModel null = NullModel::Exact(instance.dim);
  r.epsilon_lower_bound =
      ComputeEpsilonLowerBound(result.samples, null, instance.delta);
  r.null_model =
      internal::DescribeNull(null, GaussianNullApproximation(instance.dim));
  if (result.epsilon.degenerate_fit) {
    r.warnings.push_back("observed cosines have zero spread; epsilon saturated");
  }
  r.normality = internal::TryNormality(result.samples, r.warnings);
  r.runtime_seconds = runtime_seconds;
  return r;
}

// Pools the cosines of independent runs of `config` (run i seeded with
// config.seed + i) and estimates from the pool.
inline AuditReport BuildFlReport(const FederatedConfig& config,
                                 std::span<const TrainingResult> runs,
                                 double runtime_seconds,
                                 AlternateVariance mode =
                                     AlternateVariance::kFitted) {
  if (runs.empty()) throw std::invalid_argument("no runs to report");
  AuditReport r;
  r.kind = "fl-audit";
  r.config_echo = config.Resolved();
  r.runs = runs.size();
  r.delta = config.ResolvedDelta();
  r.alternate_variance = mode;

  std::vector<CosineSampleSet> obs, unobs, obs_max, unobs_max;
  for (const auto& run : runs) {
    obs.push_back(run.observed_final);
    unobs.push_back(run.unobserved_final);
    if (config.trace_all_rounds && !run.traces.empty()) {
      auto [o, u] = MaxOverRounds(run.traces, config.dim);
      obs_max.push_back(std::move(o));
      unobs_max.push_back(std::move(u));
    }
    if (run.zero_final_model) {
      r.warnings.push_back("a run ended with an all-zero model");
    }
    if (run.empty_rounds > 0) {
      r.warnings.push_back(std::to_string(run.empty_rounds) +
                           " rounds had no participants and were skipped");
    }
  }
  const CosineSampleSet observed = PoolRuns(obs);
  const CosineSampleSet unobserved = PoolRuns(unobs);
  r.sample_count = observed.size();
  r.fitted_observed = FitGaussianMoments(observed);
  r.epsilon_estimate =
      EstimateEpsilonFinal(observed, config.dim, r.delta, mode);
  if (r.epsilon_estimate.degenerate_fit) {
    r.warnings.push_back("observed cosines have zero spread; epsilon saturated");
  }
  if (unobserved.size() >= 2) {
    r.fitted_unobserved = FitGaussianMoments(unobserved);
  }
  const NullModel null = NullModel::Exact(config.dim);
  r.epsilon_lower_bound = ComputeEpsilonLowerBound(observed, null, r.delta);
  r.null_model =
      internal::DescribeNull(null, GaussianNullApproximation(config.dim));

  if (config.trace_all_rounds) {
    if (obs_max.empty() || config.observed_canaries < 2 ||
        config.unobserved_canaries < 2) {
      r.warnings.push_back(
          "all-iterates estimate needs at least 2 observed and 2 unobserved "
          "canaries and one traced round");
    } else {
      const CosineSampleSet om = PoolRuns(obs_max);
      const CosineSampleSet um = PoolRuns(unobs_max);
      r.epsilon_all_iterates = EstimateEpsilonAllIterates(om, um, r.delta);
      r.epsilon_lower_bound_all_iterates =
          ComputeEpsilonLowerBound(om, NullModel::Empirical(um), r.delta);
    }
  }
  r.normality = internal::TryNormality(observed, r.warnings);
  r.runtime_seconds = runtime_seconds;
  return r;
}

// Cosine tables ----------------------------------------------------------------

struct CosineRow {
  std::int64_t round = -1;  // -1 for final-model cosines
  std::size_t canary_id = 0;
  SampleLabel label = SampleLabel::kObserved;
  double cosine = 0.0;

  friend bool operator==(const CosineRow&, const CosineRow&) = default;
};

inline constexpr char kCosineCsvHeader[] = "round,canary_id,label,cosine";

// Rows for one training run: final cosines first, then each traced round.
inline std::vector<CosineRow> CosineRows(const TrainingResult& result) {
  std::vector<CosineRow> rows;
  auto add = [&rows](std::int64_t round, const std::vector<double>& values,
                     SampleLabel label) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      rows.push_back({round, i, label, values[i]});
    }
  };
  add(-1, result.observed_final.values, SampleLabel::kObserved);
  add(-1, result.unobserved_final.values, SampleLabel::kUnobserved);
  for (const auto& tr : result.traces) {
    const auto t = static_cast<std::int64_t>(tr.round);
    add(t, tr.observed_cosines, SampleLabel::kObserved);
    add(t, tr.unobserved_cosines, SampleLabel::kUnobserved);
  }
  return rows;
}

inline std::vector<CosineRow> CosineRows(const CosineSampleSet& samples) {
  std::vector<CosineRow> rows;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    rows.push_back({-1, i, samples.label, samples.values[i]});
  }
  return rows;
}

// Cosines are written in shortest round-trip form.
inline void WriteCosineCsv(std::ostream& out, std::span<const CosineRow> rows) {
  out << kCosineCsvHeader << '\n';
  char buf[64];
  for (const auto& row : rows) {
    const auto res = std::to_chars(buf, buf + sizeof(buf), row.cosine);
    out << row.round << ',' << row.canary_id << ',' << LabelName(row.label)
        << ',' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf))
        << '\n';
  }
}

inline std::vector<CosineRow> ReadCosineCsv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("empty cosine CSV", {});
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCosineCsvHeader) {
    throw SchemaError("cosine CSV header must be '" +
                          std::string(kCosineCsvHeader) + "'",
                      {});
  }
  std::vector<CosineRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fail = [&](const std::string& why) {
      return SchemaError(
          "cosine CSV line " + std::to_string(line_no) + ": " + why, {});
    };
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (;;) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() != 4) throw fail("expected 4 fields");
    CosineRow row;
    auto parse = [&](std::string_view f, auto& value, const char* name) {
      const auto res = std::from_chars(f.data(), f.data() + f.size(), value);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size()) {
        throw fail(std::string("bad ") + name);
      }
    };
    parse(fields[0], row.round, "round");
    parse(fields[1], row.canary_id, "canary_id");
    try {
      row.label = ParseLabel(fields[2]);
    } catch (const std::invalid_argument& e) {
      throw fail(e.what());
    }
    parse(fields[3], row.cosine, "cosine");
    if (row.round < -1) throw fail("round must be >= -1");
    if (!(row.cosine >= -1.0 && row.cosine <= 1.0)) {
      throw fail("cosine outside [-1, 1]");
    }
    rows.push_back(row);
  }
  return rows;
}

// Cosines with the given round and label, in file order.
inline CosineSampleSet SelectCosines(std::span<const CosineRow> rows,
                                     std::size_t dim, std::int64_t round,
                                     SampleLabel label) {
  CosineSampleSet out{dim, {}, label};
  for (const auto& row : rows) {
    if (row.round == round && row.label == label) {
      out.values.push_back(row.cosine);
    }
  }
  return out;
}

// Files ------------------------------------------------------------------------

// Writes `content` to a temporary file next to `path` and renames it into
// place, so readers never see a partial file.
inline void WriteFileAtomic(const std::filesystem::path& path,
                            std::string_view content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw std::runtime_error("cannot rename into " + path.string() + ": " +
                             ec.message());
  }
}

inline std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline FederatedConfig LoadFederatedConfig(const std::filesystem::path& path) {
  const std::string text = ReadFile(path);
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw SchemaError(std::string("malformed JSON: ") + e.what(), {});
  }
  return FederatedConfigFromJson(j);
}

}  // namespace canary_audit

#endif  // CANARY_AUDIT_REPORT_H_
