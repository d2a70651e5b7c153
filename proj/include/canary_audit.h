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


#ifndef CANARY_AUDIT_H_
#define CANARY_AUDIT_H_

// Empirical privacy estimation with random canaries.

#include "canary_audit/errors.h"              // IWYU pragma: export
#include "canary_audit/estimators.h"          // IWYU pragma: export
#include "canary_audit/federated.h"           // IWYU pragma: export
#include "canary_audit/gaussian.h"            // IWYU pragma: export
#include "canary_audit/gaussian_epsilon.h"    // IWYU pragma: export
#include "canary_audit/mechanism_audit.h"     // IWYU pragma: export
#include "canary_audit/random.h"              // IWYU pragma: export
#include "canary_audit/report.h"              // IWYU pragma: export
#include "canary_audit/samples.h"             // IWYU pragma: export
#include "canary_audit/special_functions.h"   // IWYU pragma: export
#include "canary_audit/sphere.h"              // IWYU pragma: export

#endif  // CANARY_AUDIT_H_
