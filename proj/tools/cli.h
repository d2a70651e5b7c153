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

#ifndef CANARY_AUDIT_TOOLS_CLI_H_
#define CANARY_AUDIT_TOOLS_CLI_H_

// The canary-audit command line.
//
// Exit codes: 0 on success, 1 when a run fails at runtime (numeric failure,
// aborted training, I/O error while writing), 2 for usage and validation
// errors (bad flags, malformed or invalid configuration, unreadable input).

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "canary_audit.h"

namespace canary_audit::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

inline constexpr char kThreadsEnv[] = "CANARY_AUDIT_THREADS";

// A usage error detected after flag parsing.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace internal {

// --threads, overridden by CANARY_AUDIT_THREADS when that is set.
inline std::size_t ResolveThreads(std::size_t flag) {
  std::size_t threads = flag;
  if (const char* env = std::getenv(kThreadsEnv); env != nullptr && *env) {
    char* end = nullptr;
    const long long v = std::strtoll(env, &end, 10);
    if (*end != '\0' || v < 1) {
      throw UsageError(std::string(kThreadsEnv) +
                       " must be a positive integer");
    }
    threads = static_cast<std::size_t>(v);
  }
  if (threads == 0) throw UsageError("--threads must be positive");
  return threads;
}

// Runs job(i) for i in [0, n) on up to `threads` threads. The first exception
// (by index) is rethrown after all jobs finish.
inline void ParallelFor(std::size_t n, std::size_t threads,
                        const std::function<void(std::size_t)>& job) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t count = std::min(threads, n);
  if (count <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < count; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

inline std::string FormatReal(double v) {
  if (std::isinf(v)) return v > 0.0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

inline double Seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                       start)
      .count();
}

inline void EnsureDir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw std::runtime_error("cannot create " + dir.string() + ": " +
                             ec.message());
  }
}

inline std::string CsvText(std::span<const CosineRow> rows) {
  std::ostringstream ss;
  WriteCosineCsv(ss, rows);
  return ss.str();
}

inline std::vector<CosineRow> LoadCosines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open " + path);
  return ReadCosineCsv(in);
}

// Mean and (n - 1)-normalized std of the per-run estimates.
inline Json Summary(std::span<const EpsilonEstimate> estimates) {
  const double n = static_cast<double>(estimates.size());
  double sum = 0.0;
  std::size_t saturated = 0;
  Json values = Json::array();
  for (const auto& e : estimates) {
    sum += e.value;
    if (e.saturated) ++saturated;
    values.push_back(canary_audit::internal::EncodeReal(e.value));
  }
  const double mean = sum / n;
  double sq = 0.0;
  for (const auto& e : estimates) sq += (e.value - mean) * (e.value - mean);
  const double sd =
      estimates.size() > 1 && std::isfinite(mean) ? std::sqrt(sq / (n - 1.0))
                                                  : (std::isfinite(mean) ? 0.0
                                                                         : kInf);
  return Json{{"runs", estimates.size()},
              {"epsilon_mean", canary_audit::internal::EncodeReal(mean)},
              {"epsilon_std", canary_audit::internal::EncodeReal(sd)},
              {"saturated_runs", saturated},
              {"epsilons", values}};
}

}  // namespace internal

struct GaussAuditFlags {
  std::size_t dim = 0;
  double sigma = 0.0;
  std::size_t canaries = 0;
  double delta = 1e-6;
  std::uint64_t seed = 0;
  std::size_t repeats = 1;
  std::string alternate_variance = "fitted";
  std::string out_dir = ".";
  std::size_t threads = 1;
};

inline int CmdGaussAudit(const GaussAuditFlags& f, std::ostream& out) {
  const std::size_t threads = internal::ResolveThreads(f.threads);
  if (f.repeats == 0) throw UsageError("--repeats must be positive");
  std::vector<GaussianSumInstance> instances(f.repeats);
  for (std::size_t i = 0; i < f.repeats; ++i) {
    GaussianSumInstance& g = instances[i];
    g.dim = f.dim;
    g.noise_std = f.sigma;
    g.canary_count = f.canaries;
    g.delta = f.delta;
    g.seed = f.seed + i;
    g.alternate_variance = ParseAlternateVariance(f.alternate_variance);
    g.Validate();
  }
  const std::filesystem::path dir(f.out_dir);
  internal::EnsureDir(dir);

  std::vector<EpsilonEstimate> estimates(f.repeats);
  internal::ParallelFor(f.repeats, threads, [&](std::size_t i) {
    const auto start = std::chrono::steady_clock::now();
    const GaussianAuditResult result = RunGaussianMechanismAudit(instances[i]);
    const AuditReport report =
        BuildGaussReport(instances[i], result, internal::Seconds(start));
    const std::string stem = "gauss_run" + std::to_string(i);
    WriteFileAtomic(dir / (stem + "_report.json"), SerializeReport(report));
    WriteFileAtomic(dir / (stem + "_cosines.csv"),
                    internal::CsvText(CosineRows(result.samples)));
    estimates[i] = result.epsilon;
  });
  out << internal::Summary(estimates).dump(2) << "\n";
  return kExitOk;
}

struct FlAuditFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::size_t runs = 1;
  std::string alternate_variance = "fitted";
  std::string out_dir = ".";
  std::size_t threads = 1;
};

inline int CmdFlAudit(const FlAuditFlags& f, std::ostream& out) {
  const std::size_t threads = internal::ResolveThreads(f.threads);
  if (f.runs == 0) throw UsageError("--runs must be positive");
  if (!std::filesystem::is_regular_file(f.config_path)) {
    throw UsageError("config file not found: " + f.config_path);
  }
  FederatedConfig config = LoadFederatedConfig(f.config_path);
  if (f.seed) config.seed = *f.seed;
  const AlternateVariance mode = ParseAlternateVariance(f.alternate_variance);
  const std::filesystem::path dir(f.out_dir);
  internal::EnsureDir(dir);

  const auto start = std::chrono::steady_clock::now();
  std::vector<TrainingResult> results(f.runs);
  internal::ParallelFor(f.runs, threads, [&](std::size_t i) {
    FederatedConfig run = config.Resolved();
    run.seed = config.seed + i;
    run.canary_seed = *run.canary_seed + i;
    results[i] = RunTraining(run);
    WriteFileAtomic(dir / ("fl_run" + std::to_string(i) + "_cosines.csv"),
                    internal::CsvText(CosineRows(results[i])));
  });
  const AuditReport report =
      BuildFlReport(config, results, internal::Seconds(start), mode);
  WriteFileAtomic(dir / "fl_report.json", SerializeReport(report));

  Json summary = ToJson(report);
  summary.erase("config_echo");
  summary.erase("runtime_seconds");
  out << summary.dump(2) << "\n";
  return kExitOk;
}

struct EpsilonFlags {
  double mu1 = 0.0, sigma1 = 0.0, mu2 = 0.0, sigma2 = 0.0;
  std::optional<double> delta;
  std::optional<double> epsilon;
  double cap = kDefaultEpsilonCap;
};

inline int CmdEpsilon(const EpsilonFlags& f, std::ostream& out) {
  if (f.delta.has_value() == f.epsilon.has_value()) {
    throw UsageError("give exactly one of --delta and --epsilon");
  }
  const GaussianHypothesis p1{f.mu1, f.sigma1};
  const GaussianHypothesis p2{f.mu2, f.sigma2};
  p1.Validate();
  p2.Validate();
  if (f.delta) {
    out << internal::FormatReal(EpsilonForDelta(p1, p2, *f.delta, f.cap))
        << "\n";
  } else {
    out << internal::FormatReal(DeltaForEpsilon(p1, p2, *f.epsilon)) << "\n";
  }
  return kExitOk;
}

struct LowerBoundFlags {
  std::string cosines_path;
  std::size_t dim = 0;
  std::string null_model = "exact";
  double delta = 1e-6;
  double confidence = 0.95;
  std::int64_t round = -1;
};

inline int CmdLowerBound(const LowerBoundFlags& f, std::ostream& out) {
  const auto rows = internal::LoadCosines(f.cosines_path);
  const CosineSampleSet observed =
      SelectCosines(rows, f.dim, f.round, SampleLabel::kObserved);
  if (observed.values.empty()) {
    throw UsageError("no observed cosines for round " +
                     std::to_string(f.round));
  }
  std::optional<NullModel> null;
  if (f.null_model == "exact") {
    null = NullModel::Exact(f.dim);
  } else if (f.null_model == "gaussian") {
    null = NullModel::Gaussian(f.dim);
  } else if (f.null_model == "empirical") {
    const CosineSampleSet unobserved =
        SelectCosines(rows, f.dim, f.round, SampleLabel::kUnobserved);
    if (unobserved.values.empty()) {
      throw UsageError("empirical null needs unobserved cosines");
    }
    null = NullModel::Empirical(unobserved);
  } else {
    throw UsageError("--null must be exact, gaussian or empirical");
  }
  RequireSphereDim(f.dim);
  const EpsilonLowerBound bound =
      ComputeEpsilonLowerBound(observed, *null, f.delta, f.confidence);
  Json j{{"null_model", std::string(null->Name())},
         {"sample_count", observed.size()},
         {"epsilon_lower_bound", canary_audit::internal::ToJson(bound)}};
  if (observed.size() >= 2) {
    j["epsilon_estimate"] = canary_audit::internal::ToJson(
        EstimateEpsilonFinal(observed, f.dim, f.delta));
    j["fitted_observed"] =
        canary_audit::internal::ToJson(FitGaussianMoments(observed));
  }
  out << j.dump(2) << "\n";
  return kExitOk;
}

struct NormalityFlags {
  std::string cosines_path;
  std::string label = "observed";
  std::int64_t round = -1;
};

inline int CmdValidateNormality(const NormalityFlags& f, std::ostream& out) {
  const auto rows = internal::LoadCosines(f.cosines_path);
  const CosineSampleSet samples =
      SelectCosines(rows, 2, f.round, ParseLabel(f.label));
  const NormalityDiagnostic diag = AndersonDarling(samples.values);
  Json j = canary_audit::internal::ToJson(diag);
  j["sample_count"] = samples.size();
  out << j.dump(2) << "\n";
  return kExitOk;
}

// Parses argv and runs one subcommand. Never throws.
inline int RunCli(const std::vector<std::string>& args, std::ostream& out,
                  std::ostream& err) {
  CLI::App app{"Empirical privacy estimation with random canaries",
               "canary-audit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolkitVersion));

  GaussAuditFlags gauss;
  auto* g = app.add_subcommand("gauss-audit",
                               "Audit one Gaussian vector-sum release");
  g->add_option("--dim", gauss.dim, "Dimension d")->required();
  g->add_option("--sigma", gauss.sigma, "Noise std")->required();
  g->add_option("--canaries", gauss.canaries, "Canaries k")->required();
  g->add_option("--delta", gauss.delta, "Target delta")
      ->capture_default_str();
  g->add_option("--seed", gauss.seed, "Master seed; run i uses seed + i")
      ->capture_default_str();
  g->add_option("--repeats", gauss.repeats, "Independent runs")
      ->capture_default_str();
  g->add_option("--alt-variance", gauss.alternate_variance,
                "Alternate variance: fitted or null")
      ->check(CLI::IsMember({"fitted", "null"}))
      ->capture_default_str();
  g->add_option("--out-dir", gauss.out_dir, "Directory for reports")
      ->capture_default_str();
  g->add_option("--threads", gauss.threads, "Concurrent runs")
      ->capture_default_str();

  FlAuditFlags fl;
  std::uint64_t fl_seed = 0;
  auto* f = app.add_subcommand("fl-audit",
                               "Train with canaries and estimate epsilon");
  f->add_option("--config,config", fl.config_path, "JSON configuration")
      ->required();
  auto* fl_seed_opt =
      f->add_option("--seed", fl_seed, "Override the configured seed");
  f->add_option("--runs", fl.runs, "Independent runs pooled before estimation")
      ->capture_default_str();
  f->add_option("--alt-variance", fl.alternate_variance,
                "Alternate variance: fitted or null")
      ->check(CLI::IsMember({"fitted", "null"}))
      ->capture_default_str();
  f->add_option("--out-dir", fl.out_dir, "Directory for outputs")
      ->capture_default_str();
  f->add_option("--threads", fl.threads, "Concurrent runs")
      ->capture_default_str();

  EpsilonFlags eps;
  double eps_delta = 0.0, eps_epsilon = 0.0;
  auto* e = app.add_subcommand("epsilon",
                               "Exact epsilon(delta) or delta(epsilon) "
                               "between two Gaussians");
  e->add_option("--mu1", eps.mu1)->required();
  e->add_option("--sigma1", eps.sigma1)->required();
  e->add_option("--mu2", eps.mu2)->required();
  e->add_option("--sigma2", eps.sigma2)->required();
  auto* eps_delta_opt = e->add_option("--delta", eps_delta);
  auto* eps_epsilon_opt = e->add_option("--epsilon", eps_epsilon);
  e->add_option("--cap", eps.cap, "Largest epsilon before reporting inf")
      ->capture_default_str();

  LowerBoundFlags lb;
  auto* l = app.add_subcommand("lower-bound",
                               "Estimators on a cosine CSV");
  l->add_option("--cosines,cosines", lb.cosines_path, "Cosine CSV")
      ->required();
  l->add_option("--dim", lb.dim, "Dimension d")->required();
  l->add_option("--null", lb.null_model, "exact, gaussian or empirical")
      ->capture_default_str();
  l->add_option("--delta", lb.delta)->capture_default_str();
  l->add_option("--confidence", lb.confidence)->capture_default_str();
  l->add_option("--round", lb.round, "Round to use; -1 for final cosines")
      ->capture_default_str();

  NormalityFlags nf;
  auto* v = app.add_subcommand("validate-normality",
                               "Anderson-Darling test on a cosine CSV");
  v->add_option("--cosines,cosines", nf.cosines_path, "Cosine CSV")
      ->required();
  v->add_option("--label", nf.label, "observed or unobserved")
      ->capture_default_str();
  v->add_option("--round", nf.round, "Round to use; -1 for final cosines")
      ->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kToolkitVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& ex) {
    err << "error: " << ex.what() << "\n" << "run with --help for usage\n";
    return kExitUsage;
  }

  try {
    if (g->parsed()) return CmdGaussAudit(gauss, out);
    if (f->parsed()) {
      if (fl_seed_opt->count() > 0) fl.seed = fl_seed;
      return CmdFlAudit(fl, out);
    }
    if (e->parsed()) {
      if (eps_delta_opt->count() > 0) eps.delta = eps_delta;
      if (eps_epsilon_opt->count() > 0) eps.epsilon = eps_epsilon;
      return CmdEpsilon(eps, out);
    }
    if (l->parsed()) return CmdLowerBound(lb, out);
    if (v->parsed()) return CmdValidateNormality(nf, out);
  } catch (const AbortedRunError& ex) {
    err << "error: run aborted at round " << ex.round() << ": " << ex.what()
        << "\n";
    return kExitRuntime;
  } catch (const SchemaError& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const std::domain_error& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitRuntime;
  }
  err << "error: no subcommand\n";
  return kExitUsage;
}

}  // namespace canary_audit::cli

#endif  // CANARY_AUDIT_TOOLS_CLI_H_
