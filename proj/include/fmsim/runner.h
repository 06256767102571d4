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

#ifndef FMSIM_RUNNER_H_
#define FMSIM_RUNNER_H_

// End-to-end analytic executors and their reports.

#include <cstdint>
#include <optional>
#include <string>

#include "fmsim/machine.h"
#include "fmsim/models.h"
#include "fmsim/timing.h"
#include "json.hpp"

namespace fmsim {

struct RunReport {
  std::string model;
  RunMode mode = RunMode::kNar;
  Format fmt = Format::kFP64;
  int64_t seq = 0;         // NAR/VIT sequence, AR prompt length
  int64_t new_tokens = 0;  // AR only
  int clusters = 1;
  bool fused = true;
  IsaMode isa_mode = IsaMode::kSsrFrep;

  double total_ns = 0;  // NAR/VIT pass, or AR decode steps
  Breakdown breakdown;
  double prefill_ns = 0;  // AR only
  double throughput = 0;  // tokens/s or images/s
  double flops = 0;
  double achieved_flops_per_s = 0;
  double fpu_utilization = 0;
  double hbm_read_bytes = 0;
  double hbm_write_bytes = 0;
  TrafficReport traffic;
  std::optional<double> speedup_vs_1_cluster;
  nlohmann::json calibration;
  nlohmann::json plan;  // filled on request

  bool images() const { return mode == RunMode::kVit; }
};

// One encoding pass over S tokens with causal masking.
RunReport RunNar(const ModelConfig& m, int64_t S, Format fmt,
                 const MachineConfig& cfg, bool fused = true);

// Prefills `prompt_len` tokens, then decodes `n_new` tokens one invocation
// at a time at cache lengths prompt_len .. prompt_len + n_new - 1.
// Throughput counts decode time only; the prefill is reported apart.
// Throws std::invalid_argument when the cache would exceed seq_max.
RunReport RunArGenerate(const ModelConfig& m, int64_t prompt_len,
                        int64_t n_new, Format fmt, const MachineConfig& cfg,
                        bool fused = true);

// Patch embedding, the encoder blocks without masking, and the classifier.
RunReport RunVit(const ModelConfig& m, Format fmt, const MachineConfig& cfg,
                 bool fused = true);

// Tiling plans, head mapping and reduction schedule of one block.
nlohmann::json DumpPlan(const ModelConfig& m, int64_t queries, Format fmt,
                        const MachineConfig& cfg);

nlohmann::json CalibrationToJson(const MachineConfig& cfg);
nlohmann::json ReportToJson(const RunReport& r);
// Aligned table with the latency share of every kernel category.
std::string ReportToText(const RunReport& r);
// axis,tokens_per_s|images_per_s,total_ns,fpu_util,hbm_read_bytes,hbm_write_bytes
std::string CsvHeader(const std::string& axis, bool images);
std::string CsvRow(const std::string& axis_value, const RunReport& r);

}  // namespace fmsim

#endif  // FMSIM_RUNNER_H_
