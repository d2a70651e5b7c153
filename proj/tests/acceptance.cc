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


// Acceptance checks. Prints one PASS/FAIL line per criterion, with the
// numbers behind it, and exits nonzero if any criterion fails. All
// tolerances are fixed here.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "canary_audit.h"
#include "cli.h"
#include "oracles.h"

namespace canary_audit {
namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

double Mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double SampleStd(const std::vector<double>& v) {
  const double m = Mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// Linear-interpolation quantile of a copy of v.
double Quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::string Format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), fmt, args...);
  return buf;
}

template <typename F>
double Simpson(F f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

// Criterion 1 ------------------------------------------------------------------

struct TableCell {
  std::size_t dim;
  double sigma;
  double mean;
  double std;
};

// Mean and std over 50 simulations, as published.
constexpr TableCell kTable[] = {
    {10000, 0.541, 9.89, 0.71},   {10000, 1.54, 3.00, 0.46},
    {10000, 4.22, 0.98, 0.41},    {100000, 0.541, 10.1, 0.41},
    {100000, 1.54, 3.00, 0.31},   {100000, 4.22, 1.05, 0.23},
    {1000000, 0.541, 10.0, 0.23}, {1000000, 1.54, 2.96, 0.15},
    {1000000, 4.22, 0.99, 0.14},
};

Outcome TableReproduction() {
  constexpr int kSeeds = 20;
  constexpr double kBand = 2.0;
  const std::vector<double> sigmas = {0.541, 1.54, 4.22};
  bool pass = true;
  std::string detail;
  for (std::size_t dim : {10000u, 100000u, 1000000u}) {
    std::vector<std::vector<double>> fitted(3), pinned(3);
    for (int seed = 0; seed < kSeeds; ++seed) {
      GaussianSumInstance g;
      g.dim = dim;
      g.canary_count =
          static_cast<std::size_t>(std::llround(std::sqrt(double(dim))));
      g.delta = 1e-6;
      g.seed = static_cast<std::uint64_t>(seed);
      const auto results = RunGaussianMechanismAuditSweep(g, sigmas);
      for (std::size_t j = 0; j < 3; ++j) {
        fitted[j].push_back(results[j].epsilon.value);
        pinned[j].push_back(EstimateEpsilonFinal(results[j].samples, dim, 1e-6,
                                                 AlternateVariance::kNull)
                                .value);
      }
    }
    for (std::size_t j = 0; j < 3; ++j) {
      const TableCell* cell = nullptr;
      for (const auto& c : kTable) {
        if (c.dim == dim && c.sigma == sigmas[j]) cell = &c;
      }
      const double m = Mean(fitted[j]);
      const bool ok = std::abs(m - cell->mean) <= kBand * cell->std;
      pass &= ok;
      detail += Format(
          "\n    d=%-7zu sigma=%-5.3g table %5.2f+-%.2f  estimate %6.3f+-%.3f "
          "%s  [equal-variance diagnostic %6.3f+-%.3f]",
          dim, sigmas[j], cell->mean, cell->std, m, SampleStd(fitted[j]),
          ok ? "ok" : "OUT", Mean(pinned[j]), SampleStd(pinned[j]));
    }
  }
  return {pass, detail};
}

// Criterion 2 ------------------------------------------------------------------

Outcome ExactEpsilonOracle() {
  constexpr double kGridTol = 1e-4;
  constexpr double kSe = 3.0;
  constexpr std::size_t kDraws = 10000000;
  double worst = 0.0;
  for (double s : {0.3, 0.5, 1.0, 2.0, 5.0}) {
    for (double delta : {1e-5, 1e-6, 1e-7}) {
      const double lib = EpsilonForDelta({0, s}, {1, s}, delta);
      worst = std::max(worst,
                       std::abs(lib - oracle::MechanismEpsilon(s, delta)));
    }
  }
  bool pass = worst <= kGridTol;
  std::string detail = Format("\n    grid: 15 points, max |diff| %.2e", worst);

  struct Case {
    GaussianHypothesis p1, p2;
    double eps;
  };
  const Case cases[] = {
      {{0, 1}, {0, 2}, 2.0},       {{0, 1}, {1, 1.5}, 1.0},
      {{0, 0.5}, {0.3, 0.2}, 3.0}, {{0, 1}, {2, 0.7}, 2.5},
      {{1, 3}, {-1, 1}, 0.5},
  };
  std::uint64_t seed = 1;
  for (const Case& c : cases) {
    const double lib = DeltaForEpsilon(c.p1, c.p2, c.eps);
    const auto mc = oracle::MonteCarloDelta(c.p1, c.p2, c.eps, kDraws, seed++);
    const double z = (lib - mc.delta) / mc.standard_error;
    // The inverse must land back on eps.
    const double back = EpsilonForDelta(c.p1, c.p2, lib);
    const bool ok = std::abs(z) <= kSe && std::abs(back - c.eps) <= 1e-6;
    pass &= ok;
    detail += Format(
        "\n    N(%g,%g^2) vs N(%g,%g^2) eps=%g: delta %.6e  MC %.6e +- %.1e  "
        "z=%+.2f  inverse %.9f %s",
        c.p1.mean, c.p1.std, c.p2.mean, c.p2.std, c.eps, lib, mc.delta,
        mc.standard_error, z, back, ok ? "ok" : "OUT");
  }
  return {pass, detail};
}

// Criterion 3 ------------------------------------------------------------------

Outcome NullSuite() {
  constexpr std::size_t kSamples = 100000;
  constexpr double kSe = 3.0;
  constexpr double kGap = 1e-3;
  constexpr double kMass = 1e-8;
  bool pass = true;
  std::string detail;
  for (std::size_t d : {100u, 10000u}) {
    // The cosine with a fixed axis is the first coordinate.
    std::vector<double> c(d), sq(kSamples);
    GaussianStream rng(2024, StreamPurpose::kTest, d);
    for (double& s : sq) {
      SampleUnitSphereInto(c, rng);
      s = c[0] * c[0];
    }
    const double var = Mean(sq);
    const double se = SampleStd(sq) / std::sqrt(double(kSamples));
    const double target = 1.0 / double(d);
    const bool ok = std::abs(var - target) <= kSe * se;
    pass &= ok;
    detail += Format("\n    variance d=%zu: %.6e vs %.6e (se %.1e) %s", d, var,
                     target, se, ok ? "ok" : "OUT");
  }
  for (std::size_t d : {1000u, 10000u, 100000u, 1000000u}) {
    const NullCosineDistribution dist(d);
    const double sd = 1.0 / std::sqrt(double(d));
    double gap = 0.0;
    for (int i = -8000; i <= 8000; ++i) {
      const double t = i * 1e-3 * sd;
      gap = std::max(gap, std::abs(dist.Cdf(t) - oracle::Phi(t / sd)));
    }
    const bool ok = gap <= kGap;
    pass &= ok;
    detail += Format("\n    sup-gap d=%zu: %.2e %s", d, gap, ok ? "ok" : "OUT");
  }
  for (std::size_t d : {3u, 10u, 100u, 1000u, 10000u}) {
    const NullCosineDistribution dist(d);
    const double w = std::min(1.0, 40.0 / std::sqrt(double(d)));
    const double mass =
        Simpson([&](double t) { return dist.Pdf(t); }, -w, w, 200000);
    const bool ok = std::abs(mass - 1.0) <= kMass;
    pass &= ok;
    detail += Format("\n    pdf mass d=%zu: 1%+.1e %s", d, mass - 1.0,
                     ok ? "ok" : "OUT");
  }
  return {pass, detail};
}

// Criterion 4 ------------------------------------------------------------------

Outcome LowerBoundCeiling() {
  constexpr double kTarget = 6.24;
  constexpr double kTol = 0.05;
  constexpr double kJeffreysTol = 1e-6;
  const CosineSampleSet obs{10000, std::vector<double>(1000, 0.5),
                            SampleLabel::kObserved};
  const EpsilonLowerBound lo =
      ComputeEpsilonLowerBound(obs, NullModel::Exact(10000), 1e-6, 0.95);
  const double lib = JeffreysUpperBound(0, 1000, 0.95);
  const double ref = oracle::Jeffreys(0, 1000, 0.95);
  const bool ok_lo = std::abs(lo.value - kTarget) <= kTol;
  const bool ok_j = std::abs(lib - ref) <= kJeffreysTol;
  return {ok_lo && ok_j,
          Format("\n    eps_lo %.4f (target %.2f +- %.2f) %s"
                 "\n    Jeffreys(0, 1000, 0.95) %.10e vs oracle %.10e %s",
                 lo.value, kTarget, kTol, ok_lo ? "ok" : "OUT", lib, ref,
                 ok_j ? "ok" : "OUT")};
}

// Criteria 5 and 6 ---------------------------------------------------------------

struct ThreatModelRun {
  // Final-model estimates at noise 0, 0.05, 0.1, 0.25.
  std::vector<double> by_noise;
  // Final-model estimates at noise 0.05 with 1, 2, 4, 8 repetitions.
  std::vector<double> by_reps;
  double all_iterates = 0.0;
  double ad_statistic = 0.0;
};

FederatedConfig ThreatModelBase(std::uint64_t seed) {
  FederatedConfig b;
  b.dim = 100000;
  b.total_clients = 10000;
  b.clients_per_round = 157;
  b.rounds = 64;
  b.observed_canaries = 200;
  b.unobserved_canaries = 200;
  b.clip_norm = 1.0;
  b.server_lr = 0.001;
  b.server_momentum = 0.9;
  b.seed = seed;
  return b;
}

ThreatModelRun RunThreatModel(std::uint64_t seed) {
  const FederatedConfig base = ThreatModelBase(seed);
  std::vector<FederatedConfig> configs;
  for (double z : {0.0, 0.05, 0.1, 0.25}) {
    FederatedConfig c = base;
    c.noise_multiplier = z;
    c.trace_all_rounds = z == 0.05;
    configs.push_back(c);
  }
  for (std::size_t r : {2u, 4u, 8u}) {
    FederatedConfig c = base;
    c.noise_multiplier = 0.05;
    c.repetitions = r;
    configs.push_back(c);
  }
  const auto results = RunTrainingBatch(configs);
  const double delta = base.ResolvedDelta();
  ThreatModelRun out;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const double e =
        EstimateEpsilonFinal(results[i].observed_final, base.dim, delta).value;
    if (i < 4) out.by_noise.push_back(e);
    if (i == 1 || i >= 4) out.by_reps.push_back(e);
  }
  const auto [om, um] = MaxOverRounds(results[1].traces, base.dim);
  out.all_iterates = EstimateEpsilonAllIterates(om, um, delta).value;
  out.ad_statistic =
      AndersonDarling(results[1].observed_final.values).ad_statistic;
  return out;
}

bool StrictlyDecreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] < v[i - 1])) return false;
  }
  return true;
}

bool StrictlyIncreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] > v[i - 1])) return false;
  }
  return true;
}

Outcome ThreatModelOrdering(const std::vector<ThreatModelRun>& runs) {
  constexpr int kNeeded = 18;
  int all_ge_final = 0, noise_monotone = 0, reps_monotone = 0;
  std::string rows;
  for (std::size_t s = 0; s < runs.size(); ++s) {
    const auto& r = runs[s];
    all_ge_final += r.all_iterates >= r.by_noise[1];
    noise_monotone += StrictlyDecreasing(r.by_noise);
    reps_monotone += StrictlyIncreasing(r.by_reps);
    rows += Format(
        "\n    seed %2zu noise[%6.2f %6.2f %6.2f %6.2f] reps[%6.2f %6.2f %6.2f "
        "%6.2f] all %6.2f",
        s, r.by_noise[0], r.by_noise[1], r.by_noise[2], r.by_noise[3],
        r.by_reps[0], r.by_reps[1], r.by_reps[2], r.by_reps[3],
        r.all_iterates);
  }
  const bool pass = all_ge_final >= kNeeded && noise_monotone >= kNeeded &&
                    reps_monotone >= kNeeded;
  return {pass, Format("\n    all>=final %d/20, decreasing in noise %d/20, "
                       "increasing in repetitions %d/20 (need %d each)",
                       all_ge_final, noise_monotone, reps_monotone, kNeeded) +
                    rows};
}

Outcome Gaussianity(const std::vector<ThreatModelRun>& runs) {
  constexpr int kMaxRejections = 3;
  constexpr int kUniformNeeded = 48;
  int rejected = 0;
  std::string stats;
  for (const auto& r : runs) {
    rejected += r.ad_statistic > 1.088;
    stats += Format(" %.2f", r.ad_statistic);
  }
  int uniform_rejected = 0;
  for (int seed = 0; seed < 50; ++seed) {
    SubstreamRng rng(seed, StreamPurpose::kTest, 3);
    std::vector<double> u(1000);
    for (double& v : u) v = rng.NextUniform();
    uniform_rejected += AndersonDarling(u).reject_1pct;
  }
  const bool pass =
      rejected <= kMaxRejections && uniform_rejected >= kUniformNeeded;
  return {pass, Format("\n    observed cosines above 1.088 in %d/20 runs "
                       "(max %d); A^2:",
                       rejected, kMaxRejections) +
                    stats +
                    Format("\n    uniform[0,1] rejected in %d/50 (need %d)",
                           uniform_rejected, kUniformNeeded)};
}

// Criterion 7 ------------------------------------------------------------------

struct CliResult {
  int code;
  std::string out;
};

CliResult Cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::RunCli(args, out, err);
  return {code, out.str()};
}

std::string WithoutRuntime(const std::string& text) {
  Json j = Json::parse(text);
  j.erase("runtime_seconds");
  return j.dump();
}

Outcome Plumbing() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() /
                       ("canary_audit_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto p = [&](const std::string& name) { return (dir / name).string(); };
  std::vector<std::string> failures;
  auto check = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };

  // Identical seeds give identical reports.
  for (const char* sub : {"a", "b"}) {
    check(Cli({"gauss-audit", "--dim", "10000", "--sigma", "1.54", "--canaries",
               "100", "--repeats", "2", "--seed", "8", "--out-dir", p(sub)})
                  .code == 0,
          "gauss-audit run");
  }
  for (const char* f : {"gauss_run0_report.json", "gauss_run1_report.json"}) {
    check(WithoutRuntime(ReadFile(dir / "a" / f)) ==
              WithoutRuntime(ReadFile(dir / "b" / f)),
          std::string("identical ") + f);
  }
  check(ReadFile(dir / "a" / "gauss_run1_cosines.csv") ==
            ReadFile(dir / "b" / "gauss_run1_cosines.csv"),
        "identical cosine csv");

  Json config{{"dim", 2000},          {"total_clients", 200},
              {"clients_per_round", 20}, {"rounds", 20},
              {"noise_multiplier", 0.3}, {"server_lr", 0.5},
              {"server_momentum", 0.5},  {"observed_canaries", 40},
              {"unobserved_canaries", 40}, {"seed", 4},
              {"trace_all_rounds", true}};
  WriteFileAtomic(dir / "fl.json", config.dump());
  for (const char* sub : {"fa", "fb"}) {
    check(Cli({"fl-audit", p("fl.json"), "--runs", "3", "--out-dir", p(sub)})
                  .code == 0,
          "fl-audit run");
  }
  check(WithoutRuntime(ReadFile(dir / "fa" / "fl_report.json")) ==
            WithoutRuntime(ReadFile(dir / "fb" / "fl_report.json")),
        "identical fl report");

  // Echoed configurations reproduce the estimates exactly.
  const AuditReport gr = ParseReport(ReadFile(dir / "a" / "gauss_run1_report.json"));
  check(RunGaussianMechanismAudit(std::get<GaussianSumInstance>(gr.config_echo))
                .epsilon == gr.epsilon_estimate,
        "gauss echo rerun");
  const AuditReport fr = ParseReport(ReadFile(dir / "fa" / "fl_report.json"));
  WriteFileAtomic(dir / "echo.json",
                  ToJson(std::get<FederatedConfig>(fr.config_echo)).dump());
  check(Cli({"fl-audit", p("echo.json"), "--runs", "3", "--out-dir", p("fc")})
                .code == 0,
        "fl echo run");
  const AuditReport fe = ParseReport(ReadFile(dir / "fc" / "fl_report.json"));
  check(fe.epsilon_estimate == fr.epsilon_estimate &&
            fe.epsilon_all_iterates == fr.epsilon_all_iterates &&
            fe.epsilon_lower_bound == fr.epsilon_lower_bound,
        "fl echo rerun");

  // Exit codes on malformed input.
  Json typo = config;
  typo["noise"] = 1;
  WriteFileAtomic(dir / "typo.json", typo.dump());
  WriteFileAtomic(dir / "broken.json", "{\"dim\":");
  Json infeasible = config;
  infeasible["clients_per_round"] = 2;
  WriteFileAtomic(dir / "infeasible.json", infeasible.dump());
  Json blowup = config;
  blowup["clip_norm"] = 1e300;
  blowup["server_lr"] = 1e300;
  blowup["noise_multiplier"] = 1e10;
  WriteFileAtomic(dir / "blowup.json", blowup.dump());
  WriteFileAtomic(dir / "bad.csv", "round,canary_id,label,cosine\n-1,0,observed,2\n");
  WriteFileAtomic(dir / "header.csv", "r,c,l,x\n");
  const std::vector<std::pair<std::vector<std::string>, int>> matrix = {
      {{"--help"}, 0},
      {{"--version"}, 0},
      {{}, 2},
      {{"bogus"}, 2},
      {{"gauss-audit", "--dim", "1", "--sigma", "1", "--canaries", "10"}, 2},
      {{"gauss-audit", "--dim", "100", "--sigma", "-1", "--canaries", "10"}, 2},
      {{"gauss-audit", "--dim", "100", "--sigma", "1"}, 2},
      {{"gauss-audit", "--dim", "100", "--sigma", "1", "--canaries", "10",
        "--delta", "1.5"},
       2},
      {{"fl-audit", p("missing.json")}, 2},
      {{"fl-audit", p("typo.json")}, 2},
      {{"fl-audit", p("broken.json")}, 2},
      {{"fl-audit", p("infeasible.json")}, 2},
      {{"fl-audit", p("blowup.json"), "--out-dir", p("x")}, 1},
      {{"epsilon", "--mu1", "0", "--sigma1", "1", "--mu2", "1", "--sigma2",
        "1"},
       2},
      {{"epsilon", "--mu1", "0", "--sigma1", "-1", "--mu2", "1", "--sigma2",
        "1", "--delta", "1e-6"},
       2},
      {{"lower-bound", p("bad.csv"), "--dim", "100"}, 2},
      {{"lower-bound", p("header.csv"), "--dim", "100"}, 2},
      {{"validate-normality", p("missing.csv")}, 2},
  };
  int matrix_ok = 0;
  for (const auto& [args, want] : matrix) {
    const int got = Cli(args).code;
    matrix_ok += got == want;
    std::string joined;
    for (const auto& a : args) joined += " " + a;
    check(got == want, Format("exit %d (want %d):", got, want) + joined);
  }
  fs::remove_all(dir);

  std::string detail = Format(
      "\n    byte-identical reports, echo reruns, exit-code matrix %d/%zu",
      matrix_ok, matrix.size());
  for (const auto& f : failures) detail += "\n    failed: " + f;
  return {failures.empty(), detail};
}

// Criterion 8 ------------------------------------------------------------------

Outcome Pooling() {
  constexpr int kReps = 20;
  constexpr std::size_t kDim = 100000;
  constexpr double kSigma = 1.54;
  std::vector<double> pooled, single;
  for (int rep = 0; rep < kReps; ++rep) {
    std::vector<CosineSampleSet> parts;
    for (int run = 0; run < 10; ++run) {
      GaussianSumInstance g;
      g.dim = kDim;
      g.noise_std = kSigma;
      g.canary_count = 100;
      g.seed = 20000 + 10 * rep + run;
      parts.push_back(RunGaussianMechanismAudit(g).samples);
    }
    pooled.push_back(EstimateEpsilonFinal(PoolRuns(parts), kDim, 1e-6).value);
    GaussianSumInstance g;
    g.dim = kDim;
    g.noise_std = kSigma;
    g.canary_count = 1000;
    g.seed = 10000 + rep;
    single.push_back(RunGaussianMechanismAudit(g).epsilon.value);
  }
  const double p25 = Quantile(pooled, 0.25), p75 = Quantile(pooled, 0.75);
  const double s25 = Quantile(single, 0.25), s75 = Quantile(single, 0.75);
  const bool pass = p25 <= s75 && s25 <= p75;
  return {pass,
          Format("\n    10x100 pooled: median %.3f IQR [%.3f, %.3f]"
                 "\n    1x1000 single: median %.3f IQR [%.3f, %.3f]",
                 Quantile(pooled, 0.5), p25, p75, Quantile(single, 0.5), s25,
                 s75)};
}

}  // namespace
}  // namespace canary_audit

int main() {
  using namespace canary_audit;
  int failed = 0;
  auto report = [&](int n, const char* name, const std::function<Outcome()>& fn) {
    const auto start = std::chrono::steady_clock::now();
    const Outcome o = fn();
    const double secs = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - start)
                            .count();
    failed += !o.pass;
    std::printf("criterion %d: %s  %s (%.0f s)%s\n", n, o.pass ? "PASS" : "FAIL",
                name, secs, o.detail.c_str());
    std::fflush(stdout);
  };
  report(1, "reference-table reproduction", TableReproduction);
  report(2, "exact-epsilon oracle equivalence", ExactEpsilonOracle);
  report(3, "null-distribution suite", NullSuite);
  report(4, "eps_lo ceiling", LowerBoundCeiling);

  std::vector<ThreatModelRun> runs;
  const auto start = std::chrono::steady_clock::now();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    runs.push_back(RunThreatModel(seed));
  }
  std::printf("(threat-model simulations: %.0f s)\n",
              std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                            start)
                  .count());
  report(5, "threat-model ordering", [&] { return ThreatModelOrdering(runs); });
  report(6, "Gaussianity diagnostics", [&] { return Gaussianity(runs); });
  report(7, "determinism and plumbing", Plumbing);
  report(8, "pooling across runs", Pooling);
  std::printf("%d of 8 criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
