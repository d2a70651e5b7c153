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

#ifndef CANARY_AUDIT_ERRORS_H_
#define CANARY_AUDIT_ERRORS_H_

// Invalid arguments are reported with std::invalid_argument and out-of-domain
// inputs with std::domain_error. The types below cover failures that depend
// on the data rather than on the call.

#include <cstddef>
#include <stdexcept>
#include <string>

namespace canary_audit {

// The released vector had zero norm, so no cosine is defined.
class DegenerateReleaseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Samples without spread (for example zero standard deviation).
class DegenerateInputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A bounded search failed to bracket or converge.
class NoConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training produced a non-finite model.
class AbortedRunError : public std::runtime_error {
 public:
  AbortedRunError(std::size_t round, const std::string& what)
      : std::runtime_error(what), round_(round) {}

  std::size_t round() const { return round_; }

 private:
  std::size_t round_;
};

}  // namespace canary_audit

#endif  // CANARY_AUDIT_ERRORS_H_
