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

#ifndef CANARY_AUDIT_RANDOM_H_
#define CANARY_AUDIT_RANDOM_H_

// Reproducible random substreams.
//
// Every random quantity in the toolkit is drawn from a substream identified by
// (master seed, purpose, index). The substream's starting state is a pure
// function of that triple (Philox4x32-10 with the seed as key and
// (purpose, index) in the counter), so any substream can be regenerated from
// scratch without touching the others.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>

namespace canary_audit {

// Philox4x32 with 10 rounds (Salmon et al., "Parallel random numbers: as easy
// as 1, 2, 3"). Pure function of (counter, key).
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter Encrypt(Counter ctr, Key key) {
    ctr = Round(ctr, key);
    for (int r = 1; r < 10; ++r) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
      ctr = Round(ctr, key);
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static constexpr Counter Round(const Counter& c, const Key& k) {
    const std::uint64_t p0 = std::uint64_t{kMul0} * c[0];
    const std::uint64_t p1 = std::uint64_t{kMul1} * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
};

// What a substream is used for. Values are part of the reproducibility
// contract: changing them changes every seeded result.
enum class StreamPurpose : std::uint32_t {
  kMechanismCanary = 1,
  kMechanismNoise = 2,
  kClientTarget = 3,
  kObservedCanary = 4,
  kUnobservedCanary = 5,
  kRoundNoise = 6,
  kSchedule = 7,
  kTest = 0xFFFF,
};

// Uniform 64-bit words from one substream. Satisfies UniformRandomBitGenerator.
//
// The substream state is the Philox encryption of (purpose, index) under the
// master seed; words are then produced by xoshiro256++ from that state.
class SubstreamRng {
 public:
  using result_type = std::uint64_t;

  SubstreamRng(std::uint64_t seed, StreamPurpose purpose, std::uint64_t index) {
    const Philox4x32::Key key{static_cast<std::uint32_t>(seed),
                              static_cast<std::uint32_t>(seed >> 32)};
    const auto lo = static_cast<std::uint32_t>(index);
    const auto hi = static_cast<std::uint32_t>(index >> 32);
    const auto p = static_cast<std::uint32_t>(purpose);
    const auto a = Philox4x32::Encrypt({0, lo, hi, p}, key);
    const auto b = Philox4x32::Encrypt({1, lo, hi, p}, key);
    state_ = {Join(a[0], a[1]), Join(a[2], a[3]), Join(b[0], b[1]),
              Join(b[2], b[3])};
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() {
    const std::uint64_t result = Rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = Rotl(state_[3], 45);
    return result;
  }

  // Uniform double in [0, 1) with 53 random bits.
  double NextUniform() { return static_cast<double>((*this)() >> 11) * 0x1p-53; }

  // Unbiased integer in [0, bound). bound must be positive.
  std::uint64_t NextBelow(std::uint64_t bound) {
    const std::uint64_t limit = max() - max() % bound;
    std::uint64_t x;
    do {
      x = (*this)();
    } while (x >= limit);
    return x % bound;
  }

 private:
  static constexpr std::uint64_t Join(std::uint32_t lo, std::uint32_t hi) {
    return (std::uint64_t{hi} << 32) | lo;
  }
  static constexpr std::uint64_t Rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> state_{};
};

namespace internal {

// Tables for the 256-layer ziggurat (Marsaglia & Tsang 2000, with Doornik's
// independent-bits variant).
struct ZigguratTables {
  static constexpr int kLayers = 256;
  static constexpr double kTailStart = 3.6541528853610088;
  static constexpr double kLayerArea = 0.00492867323399;

  std::array<double, kLayers + 1> x{};
  std::array<double, kLayers> ratio{};

  ZigguratTables() {
    double f = std::exp(-0.5 * kTailStart * kTailStart);
    x[0] = kLayerArea / f;
    x[1] = kTailStart;
    x[kLayers] = 0.0;
    for (int i = 2; i < kLayers; ++i) {
      x[i] = std::sqrt(-2.0 * std::log(kLayerArea / x[i - 1] + f));
      f = std::exp(-0.5 * x[i] * x[i]);
    }
    for (int i = 0; i < kLayers; ++i) ratio[i] = x[i + 1] / x[i];
  }

  static const ZigguratTables& Get() {
    static const ZigguratTables tables;
    return tables;
  }
};

}  // namespace internal

// Standard normal variates drawn from one substream.
class GaussianStream {
 public:
  GaussianStream(std::uint64_t seed, StreamPurpose purpose, std::uint64_t index)
      : bits_(seed, purpose, index),
        tables_(internal::ZigguratTables::Get()) {}

  double Next() {
    const auto& t = tables_;
    for (;;) {
      const std::uint64_t word = bits_();
      const int layer = static_cast<int>(word & 0xFF);
      // 53 high bits mapped to (-1, 1).
      const double u =
          (static_cast<double>(word >> 11) + 0.5) * 0x1p-52 - 1.0;
      if (std::fabs(u) < t.ratio[layer]) return u * t.x[layer];
      if (layer == 0) return Tail(u < 0.0);
      const double x = u * t.x[layer];
      const double f0 = std::exp(-0.5 * (t.x[layer] * t.x[layer] - x * x));
      const double f1 =
          std::exp(-0.5 * (t.x[layer + 1] * t.x[layer + 1] - x * x));
      if (f1 + bits_.NextUniform() * (f0 - f1) < 1.0) return x;
    }
  }

  void Fill(std::span<double> out) {
    for (double& v : out) v = Next();
  }

 private:
  double Tail(bool negative) {
    constexpr double r = internal::ZigguratTables::kTailStart;
    double x, y;
    do {
      x = std::log(1.0 - bits_.NextUniform()) / r;
      y = std::log(1.0 - bits_.NextUniform());
    } while (-2.0 * y < x * x);
    return negative ? x - r : r - x;
  }

  SubstreamRng bits_;
  const internal::ZigguratTables& tables_;
};

}  // namespace canary_audit

#endif  // CANARY_AUDIT_RANDOM_H_
