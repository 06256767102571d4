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

#ifndef FMSIM_SCHEDULER_H_
#define FMSIM_SCHEDULER_H_

// Tiling and mapping planners, the reduction tree, and the double-buffered
// phase pipeline that turns per-step work into simulated time.

#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

#include "fmsim/machine.h"
#include "fmsim/numerics.h"
#include "json.hpp"

namespace fmsim {

enum class SpatialDim : uint8_t { kNone, kM, kK };
std::string_view SpatialDimName(SpatialDim dim);

struct TileShape {
  int64_t m = 1;
  int64_t n = 1;
  int64_t k = 1;
  bool operator==(const TileShape&) const = default;
};

// Spatial split of M or K over clusters, then temporal tiles of at most
// `tile` inside each part. Temporal tiles are fixed-size with a ragged
// tail; spatial parts are balanced so none is empty.
struct TilingPlan {
  int64_t M = 1;
  int64_t N = 1;
  int64_t K = 1;
  Format in_fmt = Format::kFP64;
  Format acc_fmt = Format::kFP64;
  SpatialDim spatial_dim = SpatialDim::kNone;
  int spatial_parts = 1;
  TileShape tile;

  // Extent of the spatially split dimension owned by the largest part.
  int64_t PartExtent() const;
  // Temporal tile counts of the largest part.
  int64_t TemporalM() const;
  int64_t TemporalN() const;
  int64_t TemporalK() const;
  int64_t TemporalSteps() const {
    return TemporalM() * TemporalN() * TemporalK();
  }
  // Double-buffered A and B plus the resident C tile (accumulator width).
  int64_t WorkingSetBytes() const;
};

// (offset, length) pairs.
using Ranges = std::vector<std::pair<int64_t, int64_t>>;

// ceil(extent / tile) tiles of `tile`, the last absorbing the remainder.
Ranges TileRanges(int64_t extent, int64_t tile);
// `parts` contiguous ranges whose lengths differ by at most one.
Ranges SplitEven(int64_t extent, int parts);

// Throws std::invalid_argument describing the first violated constraint.
void ValidatePlan(const TilingPlan& plan, const MachineConfig& cfg);

// Spatial parts default to min(total clusters, extent of the split
// dimension); `max_parts` > 0 overrides the cluster budget. Tile search
// maximizes k, then m, then n under the SPM budget.
TilingPlan PlanGemmTiling(int64_t M, int64_t N, int64_t K, Format in_fmt,
                          const MachineConfig& cfg,
                          SpatialDim hint = SpatialDim::kM,
                          int max_parts = 0);
TilingPlan PlanGemmTiling(int64_t M, int64_t N, int64_t K, Format in_fmt,
                          Format acc_fmt, const MachineConfig& cfg,
                          SpatialDim hint, int max_parts);

struct HeadAssignment {
  int head = 0;
  int cluster = 0;
  int slot = 0;
};

struct HeadMapping {
  std::vector<HeadAssignment> assignments;
  int slots = 0;
  int active_clusters = 0;
};

// Round-robin: head h runs on cluster h mod n in slot h / n.
HeadMapping PlanMhaMapping(int heads, const MachineConfig& cfg);

struct ReductionStep {
  int level = 0;  // 1-based
  int sender = 0;
  int receiver = 0;
  bool intra_group = true;
};

// Binary tree: at level l the receivers are multiples of 2^l and each
// receives from the participant 2^(l-1) above it. With clusters numbered
// group-major, the first log2(C) levels stay inside a group.
struct ReductionSchedule {
  int participants = 1;
  int levels = 0;
  std::vector<ReductionStep> steps;
};

// Throws std::invalid_argument unless `participants` is a power of two.
ReductionSchedule BuildReductionSchedule(int participants,
                                         int clusters_per_group);
ReductionSchedule BuildReductionSchedule(const MachineConfig& cfg);
// Throws std::invalid_argument when a participant sends twice, receives
// after sending, or a step references a participant out of range.
void ValidateSchedule(const ReductionSchedule& schedule);

// Work of one pipeline step on one cluster.
struct PhaseStep {
  double compute_cycles = 0;
  double dma_in_bytes = 0;
  double dma_out_bytes = 0;
  RouteKind route = RouteKind::kHbm;
  double hbm_requesters = 1;
  int in_transfers = 1;   // each pays the static overhead
  int out_transfers = 1;
};

enum class Bound : uint8_t { kCompute, kMemory };

struct PhaseTiming {
  double prologue_ns = 0;
  double steady_ns = 0;
  double epilogue_ns = 0;
  double total_ns = 0;
  double compute_ns = 0;
  double dma_ns = 0;
  Bound bound = Bound::kCompute;
};

double StepInNs(const PhaseStep& step, const MachineConfig& cfg);
double StepOutNs(const PhaseStep& step, const MachineConfig& cfg);

// prologue = load of step 0; steady = sum over i of
// max(compute_i, load_{i+1} + writeback_{i-1}); epilogue = last writeback.
PhaseTiming SimulatePhases(const std::vector<PhaseStep>& steps,
                           const MachineConfig& cfg);

nlohmann::json PlanToJson(const TilingPlan& plan);
nlohmann::json MappingToJson(const HeadMapping& mapping);
nlohmann::json ScheduleToJson(const ReductionSchedule& schedule);

}  // namespace fmsim

#endif  // FMSIM_SCHEDULER_H_
