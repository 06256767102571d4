// Copyright 2026 The fmsim Authors
// SPDX-License-Identifier: Apache-2.0
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

#ifndef FMSIM_VALIDATION_H_
#define FMSIM_VALIDATION_H_

// Desk-scale numeric self-checks and the reproduction recipe runner behind
// `fmsim validate`.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fmsim/kernels.h"
#include "fmsim/numerics.h"

namespace fmsim {

// Value of an 8-bit pattern (NaN for NaN encodings). `fmt` must be FP8.
double DecodeFp8(uint8_t bits, Format fmt);
// Bit pattern of a representable FP8 value (canonical NaN for NaN).
uint8_t EncodeFp8(double value, Format fmt);

struct CheckResult {
  std::string name;
  bool pass = false;
  double measured = 0;  // max error or the key measured quantity
  std::string detail;
};

struct ValidationOptions {
  uint64_t seed = 1;
  int attention_cases = 200;
  int gemm_plans = 200;
  int64_t monotonic_pairs = 1000000;
  int64_t gelu_points = 100000;
  IGeluCoefficients gelu;
};

CheckResult CheckFlashAttention(Format fmt, const ValidationOptions& opt);
CheckResult CheckGemmTiled(const ValidationOptions& opt);
CheckResult CheckTreeReduce(const ValidationOptions& opt);
CheckResult CheckArNar(const ValidationOptions& opt);
CheckResult CheckFp8Fidelity(const ValidationOptions& opt);
CheckResult CheckIGeluBound(const ValidationOptions& opt);

// All numeric checks, in a fixed order.
std::vector<CheckResult> RunValidation(const ValidationOptions& opt);

struct Recipe {
  int criterion = 0;
  std::string id;
  std::string command;    // CLI invocation reproducing the data
  std::string assertion;  // human-readable window or trend
  std::string basis;      // "published result" or "independent oracle"
  std::string check;      // evaluator name
};

// Throws std::invalid_argument on malformed manifests.
std::vector<Recipe> LoadRecipes(const std::string& path);
std::string DefaultRecipePath();

// Evaluates one recipe with the default machine calibration.
CheckResult RunRecipe(const Recipe& recipe, const ValidationOptions& opt);

std::string FormatCheck(const CheckResult& r);

}  // namespace fmsim

#endif  // FMSIM_VALIDATION_H_
