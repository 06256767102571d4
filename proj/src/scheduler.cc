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

#include "fmsim/scheduler.h"

#include <algorithm>
#include <bit>
#include <stdexcept>
#include <string>

namespace fmsim {
namespace {

int64_t CeilDiv(int64_t a, int64_t b) { return (a + b - 1) / b; }

[[noreturn]] void PlanError(const std::string& what) {
  throw std::invalid_argument("invalid tiling plan: " + what);
}

int64_t WorkingSet(int64_t m, int64_t n, int64_t k, int64_t a, int64_t c) {
  return 2 * (m * k * a + k * n * a) + m * n * c;
}

}  // namespace

std::string_view SpatialDimName(SpatialDim dim) {
  switch (dim) {
    case SpatialDim::kM:
      return "M";
    case SpatialDim::kK:
      return "K";
    case SpatialDim::kNone:
      break;
  }
  return "none";
}

int64_t TilingPlan::PartExtent() const {
  switch (spatial_dim) {
    case SpatialDim::kM:
      return CeilDiv(M, spatial_parts);
    case SpatialDim::kK:
      return CeilDiv(K, spatial_parts);
    case SpatialDim::kNone:
      break;
  }
  return 0;
}

int64_t TilingPlan::TemporalM() const {
  const int64_t rows = spatial_dim == SpatialDim::kM ? PartExtent() : M;
  return CeilDiv(rows, tile.m);
}

int64_t TilingPlan::TemporalN() const { return CeilDiv(N, tile.n); }

int64_t TilingPlan::TemporalK() const {
  const int64_t depth = spatial_dim == SpatialDim::kK ? PartExtent() : K;
  return CeilDiv(depth, tile.k);
}

int64_t TilingPlan::WorkingSetBytes() const {
  return WorkingSet(tile.m, tile.n, tile.k, ByteWidth(in_fmt),
                    ByteWidth(acc_fmt));
}

Ranges TileRanges(int64_t extent, int64_t tile) {
  if (tile < 1) throw std::invalid_argument("TileRanges: tile must be >= 1");
  Ranges out;
  for (int64_t off = 0; off < extent; off += tile) {
    out.emplace_back(off, std::min(tile, extent - off));
  }
  return out;
}

Ranges SplitEven(int64_t extent, int parts) {
  if (parts < 1 || parts > extent) {
    throw std::invalid_argument("SplitEven: parts must be in [1, extent]");
  }
  Ranges out;
  const int64_t base = extent / parts, extra = extent % parts;
  int64_t off = 0;
  for (int p = 0; p < parts; ++p) {
    const int64_t len = base + (p < extra ? 1 : 0);
    out.emplace_back(off, len);
    off += len;
  }
  return out;
}

void ValidatePlan(const TilingPlan& plan, const MachineConfig& cfg) {
  if (plan.M < 1 || plan.N < 1 || plan.K < 1) PlanError("empty GEMM");
  if (plan.tile.m < 1 || plan.tile.n < 1 || plan.tile.k < 1) {
    PlanError("tile extents must be positive");
  }
  if (plan.spatial_parts < 1) PlanError("spatial_parts must be positive");
  if (plan.spatial_parts > cfg.total_clusters()) {
    PlanError("spatial_parts exceeds the cluster count");
  }
  switch (plan.spatial_dim) {
    case SpatialDim::kNone:
      if (plan.spatial_parts != 1) PlanError("unsplit plan with parts > 1");
      break;
    case SpatialDim::kM:
      if (plan.spatial_parts > plan.M) PlanError("more M parts than rows");
      break;
    case SpatialDim::kK:
      if (plan.spatial_parts > plan.K) PlanError("more K parts than K");
      break;
  }
  const int64_t rows =
      plan.spatial_dim == SpatialDim::kM ? plan.PartExtent() : plan.M;
  const int64_t depth =
      plan.spatial_dim == SpatialDim::kK ? plan.PartExtent() : plan.K;
  if (plan.tile.m > rows || plan.tile.n > plan.N || plan.tile.k > depth) {
    PlanError("tile larger than the iteration space");
  }
  if (!IsSupportedWidening(plan.in_fmt, plan.acc_fmt)) {
    PlanError("unsupported accumulator format");
  }
  if (plan.WorkingSetBytes() > cfg.spm_bytes) {
    PlanError("double-buffered working set of " +
              std::to_string(plan.WorkingSetBytes()) +
              " bytes exceeds the scratchpad");
  }
}

TilingPlan PlanGemmTiling(int64_t M, int64_t N, int64_t K, Format in_fmt,
                          const MachineConfig& cfg, SpatialDim hint,
                          int max_parts) {
  return PlanGemmTiling(M, N, K, in_fmt, DefaultAccumulator(in_fmt), cfg,
                        hint, max_parts);
}

TilingPlan PlanGemmTiling(int64_t M, int64_t N, int64_t K, Format in_fmt,
                          Format acc_fmt, const MachineConfig& cfg,
                          SpatialDim hint, int max_parts) {
  if (M < 1 || N < 1 || K < 1) {
    throw std::invalid_argument("PlanGemmTiling: dimensions must be >= 1");
  }
  TilingPlan plan;
  plan.M = M;
  plan.N = N;
  plan.K = K;
  plan.in_fmt = in_fmt;
  plan.acc_fmt = acc_fmt;
  plan.spatial_dim = hint;
  const int64_t budget = max_parts > 0 ? max_parts : cfg.total_clusters();
  switch (hint) {
    case SpatialDim::kM:
      plan.spatial_parts = static_cast<int>(std::min(budget, M));
      break;
    case SpatialDim::kK:
      plan.spatial_parts = static_cast<int>(std::min(budget, K));
      break;
    case SpatialDim::kNone:
      plan.spatial_parts = 1;
      break;
  }
  const int64_t rows = hint == SpatialDim::kM ? plan.PartExtent() : M;
  const int64_t depth = hint == SpatialDim::kK ? plan.PartExtent() : K;
  const int64_t a = ByteWidth(in_fmt), c = ByteWidth(acc_fmt);
  const int64_t spm = cfg.spm_bytes;

  int64_t m = std::min<int64_t>(8, rows), n = std::min<int64_t>(8, N);
  if (WorkingSet(m, n, 1, a, c) > spm) m = n = 1;
  if (WorkingSet(1, 1, 1, a, c) > spm) {
    throw std::invalid_argument(
        "PlanGemmTiling: scratchpad too small for a 1x1x1 tile");
  }
  // Largest k for the starting m and n, then grow m, then n.
  int64_t k = (spm - m * n * c) / (2 * a * (m + n));
  k = std::clamp<int64_t>(k, 1, depth);
  int64_t m_max = (spm - 2 * k * n * a) / (2 * k * a + n * c);
  m = std::clamp<int64_t>(m_max, m, rows);
  int64_t n_max = (spm - 2 * m * k * a) / (2 * k * a + m * c);
  n = std::clamp<int64_t>(n_max, n, N);
  plan.tile = {m, n, k};
  ValidatePlan(plan, cfg);
  return plan;
}

HeadMapping PlanMhaMapping(int heads, const MachineConfig& cfg) {
  if (heads < 1) throw std::invalid_argument("PlanMhaMapping: heads < 1");
  const int n = cfg.total_clusters();
  HeadMapping mapping;
  for (int h = 0; h < heads; ++h) {
    mapping.assignments.push_back({h, h % n, h / n});
  }
  mapping.slots = (heads + n - 1) / n;
  mapping.active_clusters = std::min(heads, n);
  return mapping;
}

ReductionSchedule BuildReductionSchedule(int participants,
                                         int clusters_per_group) {
  if (participants < 1 ||
      !std::has_single_bit(static_cast<unsigned>(participants))) {
    throw std::invalid_argument(
        "reduction schedule needs a power-of-two participant count, got " +
        std::to_string(participants));
  }
  if (clusters_per_group < 1) {
    throw std::invalid_argument("reduction schedule: clusters_per_group < 1");
  }
  ReductionSchedule schedule;
  schedule.participants = participants;
  schedule.levels = std::countr_zero(static_cast<unsigned>(participants));
  for (int level = 1; level <= schedule.levels; ++level) {
    const int stride = 1 << (level - 1);
    for (int r = 0; r < participants; r += 2 * stride) {
      const int s = r + stride;
      schedule.steps.push_back(
          {level, s, r, r / clusters_per_group == s / clusters_per_group});
    }
  }
  return schedule;
}

ReductionSchedule BuildReductionSchedule(const MachineConfig& cfg) {
  return BuildReductionSchedule(cfg.total_clusters(), cfg.clusters_per_group);
}

void ValidateSchedule(const ReductionSchedule& schedule) {
  const int n = schedule.participants;
  if (n < 1) throw std::invalid_argument("schedule: no participants");
  std::vector<bool> sent(n, false);
  int last_level = 0;
  for (const ReductionStep& step : schedule.steps) {
    if (step.sender < 0 || step.sender >= n || step.receiver < 0 ||
        step.receiver >= n || step.sender == step.receiver) {
      throw std::invalid_argument("schedule: bad participant in step");
    }
    if (step.level < last_level) {
      throw std::invalid_argument("schedule: levels out of order");
    }
    if (sent[step.sender] || sent[step.receiver]) {
      throw std::invalid_argument("schedule: participant used after sending");
    }
    sent[step.sender] = true;
    last_level = step.level;
  }
  for (int i = 1; i < n; ++i) {
    if (!sent[i]) {
      throw std::invalid_argument("schedule: participant " +
                                  std::to_string(i) + " never sends");
    }
  }
}

double StepInNs(const PhaseStep& step, const MachineConfig& cfg) {
  if (step.dma_in_bytes <= 0) return 0.0;
  const double per = cfg.dma_static_ns +
                     (step.route == RouteKind::kHbm ? cfg.hbm_roundtrip_ns : 0);
  return DmaTime(step.dma_in_bytes, step.route, cfg, step.hbm_requesters) +
         (std::max(step.in_transfers, 1) - 1) * per;
}

double StepOutNs(const PhaseStep& step, const MachineConfig& cfg) {
  if (step.dma_out_bytes <= 0) return 0.0;
  const double per = cfg.dma_static_ns +
                     (step.route == RouteKind::kHbm ? cfg.hbm_roundtrip_ns : 0);
  return DmaTime(step.dma_out_bytes, step.route, cfg, step.hbm_requesters) +
         (std::max(step.out_transfers, 1) - 1) * per;
}

PhaseTiming SimulatePhases(const std::vector<PhaseStep>& steps,
                           const MachineConfig& cfg) {
  if (steps.empty()) throw std::invalid_argument("SimulatePhases: no steps");
  const size_t n = steps.size();
  std::vector<double> in(n), out(n);
  for (size_t i = 0; i < n; ++i) {
    in[i] = StepInNs(steps[i], cfg);
    out[i] = StepOutNs(steps[i], cfg);
  }
  PhaseTiming t;
  t.prologue_ns = in[0];
  for (size_t i = 0; i < n; ++i) {
    const double compute = CyclesToNs(steps[i].compute_cycles, cfg);
    const double dma = (i + 1 < n ? in[i + 1] : 0.0) + (i > 0 ? out[i - 1] : 0.0);
    t.steady_ns += std::max(compute, dma);
    t.compute_ns += compute;
    t.dma_ns += dma;
  }
  t.epilogue_ns = out[n - 1];
  t.total_ns = t.prologue_ns + t.steady_ns + t.epilogue_ns;
  t.bound = t.compute_ns >= t.dma_ns ? Bound::kCompute : Bound::kMemory;
  return t;
}

nlohmann::json PlanToJson(const TilingPlan& plan) {
  return {{"M", plan.M},
          {"N", plan.N},
          {"K", plan.K},
          {"in_fmt", std::string(FormatName(plan.in_fmt))},
          {"acc_fmt", std::string(FormatName(plan.acc_fmt))},
          {"spatial_dim", std::string(SpatialDimName(plan.spatial_dim))},
          {"spatial_parts", plan.spatial_parts},
          {"tile_shape", {{"m", plan.tile.m}, {"n", plan.tile.n},
                          {"k", plan.tile.k}}},
          {"temporal_tiles", {{"M", plan.TemporalM()},
                              {"N", plan.TemporalN()},
                              {"K", plan.TemporalK()}}},
          {"working_set_bytes", plan.WorkingSetBytes()}};
}

nlohmann::json MappingToJson(const HeadMapping& mapping) {
  nlohmann::json assignments = nlohmann::json::array();
  for (const HeadAssignment& a : mapping.assignments) {
    assignments.push_back(
        {{"head", a.head}, {"cluster", a.cluster}, {"slot", a.slot}});
  }
  return {{"slots", mapping.slots},
          {"active_clusters", mapping.active_clusters},
          {"assignments", assignments}};
}

nlohmann::json ScheduleToJson(const ReductionSchedule& schedule) {
  nlohmann::json steps = nlohmann::json::array();
  for (const ReductionStep& s : schedule.steps) {
    steps.push_back({{"level", s.level},
                     {"sender", s.sender},
                     {"receiver", s.receiver},
                     {"intra_group", s.intra_group}});
  }
  return {{"participants", schedule.participants},
          {"levels", schedule.levels},
          {"steps", steps}};
}

}  // namespace fmsim
