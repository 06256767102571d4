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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "fmsim/machine.h"
#include "fmsim/scheduler.h"
#include "oracles.h"

namespace fmsim {
namespace {

int64_t WorkingSet(const TileShape& t, Format in, Format acc) {
  return 2 * (t.m * t.k + t.k * t.n) * ByteWidth(in) + t.m * t.n * ByteWidth(acc);
}

// Checks that `ranges` tile [0, extent) exactly, in order, without gaps.
void ExpectCover(const Ranges& ranges, int64_t extent) {
  int64_t next = 0;
  for (const auto& [off, len] : ranges) {
    ASSERT_EQ(off, next);
    ASSERT_GE(len, 1);
    next = off + len;
  }
  ASSERT_EQ(next, extent);
}

TEST(Ranges, TileAndSplit) {
  const Ranges t = TileRanges(10, 4);
  ASSERT_EQ(t.size(), 3u);
  EXPECT_EQ(t[2], (std::pair<int64_t, int64_t>{8, 2}));
  const Ranges s = SplitEven(10, 4);
  ASSERT_EQ(s.size(), 4u);
  for (const auto& r : s) EXPECT_TRUE(r.second == 2 || r.second == 3);
  ExpectCover(s, 10);
}

TEST(RangesProperty, ExactCover) {
  oracle::Gen g(101);
  for (int i = 0; i < 2000; ++i) {
    const int64_t extent = g.Int(1, 5000);
    ExpectCover(TileRanges(extent, g.Int(1, extent)), extent);
    const int parts = static_cast<int>(g.Int(1, std::min<int64_t>(extent, 64)));
    const Ranges s = SplitEven(extent, parts);
    ASSERT_EQ(static_cast<int>(s.size()), parts);
    ExpectCover(s, extent);
    int64_t lo = extent, hi = 0;
    for (const auto& r : s) {
      lo = std::min(lo, r.second);
      hi = std::max(hi, r.second);
    }
    ASSERT_LE(hi - lo, 1);
  }
}

TEST(PlanGemmTiling, Examples) {
  const MachineConfig cfg = DefaultMachineConfig();
  const TilingPlan big = PlanGemmTiling(2048, 4096, 4096, Format::kFP16, cfg);
  EXPECT_EQ(big.spatial_dim, SpatialDim::kM);
  EXPECT_EQ(big.spatial_parts, 16);
  EXPECT_EQ(big.PartExtent(), 128);
  EXPECT_LE(WorkingSet(big.tile, Format::kFP16, Format::kFP32), cfg.spm_bytes);
  EXPECT_EQ(big.WorkingSetBytes(), WorkingSet(big.tile, Format::kFP16, Format::kFP32));

  const MachineConfig one = WithClusters(cfg, 1);
  const TilingPlan small = PlanGemmTiling(8, 8, 8, Format::kFP64, one);
  EXPECT_EQ(small.spatial_parts, 1);
  EXPECT_EQ(small.tile, (TileShape{8, 8, 8}));
  EXPECT_EQ(small.TemporalM(), 1);
  EXPECT_EQ(small.TemporalN(), 1);
  EXPECT_EQ(small.TemporalK(), 1);

  // Output projection with the head outputs already resident: one K part
  // per cluster that computed a head.
  const TilingPlan kplan =
      PlanGemmTiling(197, 768, 12 * 64, Format::kFP16, cfg, SpatialDim::kK, 12);
  EXPECT_EQ(kplan.spatial_dim, SpatialDim::kK);
  EXPECT_EQ(kplan.spatial_parts, 12);
  EXPECT_EQ(kplan.PartExtent(), 64);

  EXPECT_THROW(PlanGemmTiling(0, 8, 8, Format::kFP64, cfg), std::invalid_argument);
}

TEST(PlanGemmTilingProperty, FeasibleAndGreedy) {
  oracle::Gen g(102);
  const MachineConfig base = DefaultMachineConfig();
  for (int i = 0; i < 3000; ++i) {
    const MachineConfig cfg = WithClusters(base, 1 << g.Int(0, 4));
    const Format f = kAllFormats[g.Int(0, 5)];
    const int64_t M = g.Int(1, 4096), N = g.Int(1, 4096), K = g.Int(1, 4096);
    const SpatialDim hint = g.Coin() ? SpatialDim::kM : SpatialDim::kK;
    const TilingPlan p = PlanGemmTiling(M, N, K, f, cfg, hint);
    ASSERT_NO_THROW(ValidatePlan(p, cfg));
    ASSERT_LE(p.spatial_parts, cfg.total_clusters());
    ASSERT_LE(WorkingSet(p.tile, f, p.acc_fmt), cfg.spm_bytes);
    const int64_t rows = hint == SpatialDim::kM ? p.PartExtent() : M;
    // The last greedy step leaves no room to widen n.
    if (p.tile.n < N) {
      TileShape wider = p.tile;
      ++wider.n;
      ASSERT_GT(WorkingSet(wider, f, p.acc_fmt), cfg.spm_bytes);
    }
    ASSERT_LE(p.tile.m, rows);
    const Ranges parts = SplitEven(hint == SpatialDim::kM ? M : K, p.spatial_parts);
    ExpectCover(parts, hint == SpatialDim::kM ? M : K);
  }
}

TEST(ValidatePlan, RejectsBadPlans) {
  const MachineConfig cfg = DefaultMachineConfig();
  TilingPlan p = PlanGemmTiling(64, 64, 64, Format::kFP64, cfg);
  TilingPlan bad = p;
  bad.tile = {64, 64, 64};
  bad.spatial_dim = SpatialDim::kNone;
  bad.spatial_parts = 1;
  EXPECT_THROW(ValidatePlan(bad, cfg), std::invalid_argument);  // SPM
  bad = p;
  bad.spatial_parts = 17;
  EXPECT_THROW(ValidatePlan(bad, cfg), std::invalid_argument);
  bad = p;
  bad.tile.m = 100;
  EXPECT_THROW(ValidatePlan(bad, cfg), std::invalid_argument);
  bad = p;
  bad.acc_fmt = Format::kFP8E4M3;
  EXPECT_THROW(ValidatePlan(bad, cfg), std::invalid_argument);
}

TEST(PlanMhaMapping, Examples) {
  const MachineConfig cfg = DefaultMachineConfig();
  const HeadMapping a = PlanMhaMapping(16, cfg);
  EXPECT_EQ(a.slots, 1);
  EXPECT_EQ(a.active_clusters, 16);
  std::set<int> clusters;
  for (const auto& h : a.assignments) clusters.insert(h.cluster);
  EXPECT_EQ(clusters.size(), 16u);

  const HeadMapping b = PlanMhaMapping(12, cfg);
  EXPECT_EQ(b.active_clusters, 12);
  EXPECT_EQ(b.slots, 1);

  const HeadMapping c = PlanMhaMapping(16, WithClusters(cfg, 4));
  EXPECT_EQ(c.slots, 4);
  EXPECT_EQ(c.active_clusters, 4);
  for (const auto& h : c.assignments) {
    EXPECT_EQ(h.cluster, h.head % 4);
    EXPECT_EQ(h.slot, h.head / 4);
  }
  EXPECT_THROW(PlanMhaMapping(0, cfg), std::invalid_argument);
}

TEST(ReductionSchedule, Examples) {
  const ReductionSchedule s16 = BuildReductionSchedule(DefaultMachineConfig());
  EXPECT_EQ(s16.levels, 4);
  for (const auto& st : s16.steps) {
    EXPECT_EQ(st.intra_group, st.level <= 2) << st.level;
  }
  const ReductionSchedule s2 = BuildReductionSchedule(2, 4);
  ASSERT_EQ(s2.steps.size(), 1u);
  EXPECT_EQ(s2.steps[0].level, 1);
  EXPECT_EQ(s2.steps[0].sender, 1);
  EXPECT_EQ(s2.steps[0].receiver, 0);
  EXPECT_TRUE(BuildReductionSchedule(1, 1).steps.empty());
  EXPECT_THROW(BuildReductionSchedule(12, 4), std::invalid_argument);
}

TEST(ReductionScheduleProperty, BinaryTreeIntoRoot) {
  for (int log = 0; log <= 8; ++log) {
    for (int cpg : {1, 2, 4, 8}) {
      const int n = 1 << log;
      const ReductionSchedule s = BuildReductionSchedule(n, cpg);
      ASSERT_NO_THROW(ValidateSchedule(s));
      ASSERT_EQ(static_cast<int>(s.steps.size()), n - 1);
      // Replaying the tree on counts delivers every contribution to 0.
      std::vector<int> count(n, 1);
      for (const auto& st : s.steps) {
        count[st.receiver] += count[st.sender];
        count[st.sender] = 0;
        ASSERT_EQ(st.intra_group, st.sender / cpg == st.receiver / cpg);
      }
      ASSERT_EQ(count[0], n);
    }
  }
  ReductionSchedule broken = BuildReductionSchedule(4, 4);
  broken.steps.push_back({3, 1, 0, true});
  EXPECT_THROW(ValidateSchedule(broken), std::invalid_argument);
}

PhaseStep Step(double compute_ns, double in_bytes, double out_bytes) {
  PhaseStep s;
  s.compute_cycles = compute_ns;  // 1 GHz
  s.dma_in_bytes = in_bytes;
  s.dma_out_bytes = out_bytes;
  s.route = RouteKind::kIntraGroup;
  return s;
}

// Bytes that take exactly `ns` on an intra-group route.
double BytesFor(double ns) { return (ns - 115.0) * 56.0; }

TEST(SimulatePhases, Examples) {
  const MachineConfig cfg = DefaultMachineConfig();
  const PhaseTiming one = SimulatePhases({Step(700, 0, 0)}, cfg);
  EXPECT_DOUBLE_EQ(one.total_ns, 700.0);

  const PhaseTiming heavy =
      SimulatePhases({Step(1e6, 1000, 1000), Step(1e6, 1000, 1000)}, cfg);
  EXPECT_EQ(heavy.bound, Bound::kCompute);
  EXPECT_DOUBLE_EQ(heavy.steady_ns, 2e6);

  const double b = BytesFor(500);
  const PhaseTiming three =
      SimulatePhases({Step(1000, b, b), Step(1000, b, b), Step(1000, b, b)}, cfg);
  EXPECT_DOUBLE_EQ(three.prologue_ns, 500.0);
  EXPECT_DOUBLE_EQ(three.epilogue_ns, 500.0);
  EXPECT_DOUBLE_EQ(three.total_ns, 500.0 + 3 * 1000.0 + 500.0);

  EXPECT_THROW(SimulatePhases({}, cfg), std::invalid_argument);
}

// Independent trace: at every step the DMA engine loads the next input and
// writes back the previous output while the cores compute.
double TraceOracle(const std::vector<double>& compute, const std::vector<double>& in,
                   const std::vector<double>& out) {
  const size_t n = compute.size();
  double t = in[0];
  for (size_t i = 0; i < n; ++i) {
    const double next_in = i + 1 < n ? in[i + 1] : 0;
    const double prev_out = i > 0 ? out[i - 1] : 0;
    t += std::max(compute[i], next_in + prev_out);
  }
  return t + out[n - 1];
}

TEST(SimulatePhasesProperty, MatchesTraceOracle) {
  const MachineConfig cfg = DefaultMachineConfig();
  oracle::Gen g(103);
  for (int trial = 0; trial < 500; ++trial) {
    const size_t n = g.Int(1, 12);
    std::vector<PhaseStep> steps;
    std::vector<double> c(n), in(n), out(n);
    for (size_t i = 0; i < n; ++i) {
      c[i] = g.Uniform(0, 5000);
      in[i] = g.Coin() ? g.Uniform(200, 3000) : 0;
      out[i] = g.Coin() ? g.Uniform(200, 3000) : 0;
      steps.push_back(Step(c[i], in[i] > 0 ? BytesFor(in[i]) : 0,
                           out[i] > 0 ? BytesFor(out[i]) : 0));
    }
    ASSERT_NEAR(SimulatePhases(steps, cfg).total_ns, TraceOracle(c, in, out), 1e-6);
  }
}

TEST(SimulatePhasesProperty, SplittingComputeBoundStepIsNeutral) {
  const MachineConfig cfg = DefaultMachineConfig();
  oracle::Gen g(104);
  for (int trial = 0; trial < 500; ++trial) {
    const size_t n = g.Int(1, 8);
    std::vector<PhaseStep> steps;
    for (size_t i = 0; i < n; ++i) {
      steps.push_back(Step(g.Uniform(20000, 40000), BytesFor(g.Uniform(200, 2000)),
                           BytesFor(g.Uniform(200, 2000))));
    }
    const size_t k = g.Int(0, n - 1);
    // Both halves stay compute-bound: each exceeds any DMA of 4000 ns.
    const double frac = g.Uniform(0.25, 0.75);
    PhaseStep first = steps[k], second = steps[k];
    first.compute_cycles = steps[k].compute_cycles * frac;
    second.compute_cycles = steps[k].compute_cycles - first.compute_cycles;
    first.dma_out_bytes = 0;
    second.dma_in_bytes = 0;
    std::vector<PhaseStep> split(steps.begin(), steps.begin() + k);
    split.push_back(first);
    split.push_back(second);
    split.insert(split.end(), steps.begin() + k + 1, steps.end());
    ASSERT_NEAR(SimulatePhases(split, cfg).total_ns, SimulatePhases(steps, cfg).total_ns,
                1e-6);
  }
}

TEST(SimulatePhases, TransfersPayStaticOverheadEach) {
  const MachineConfig cfg = DefaultMachineConfig();
  PhaseStep s = Step(0, 5600, 0);
  const double one = StepInNs(s, cfg);
  s.in_transfers = 3;
  EXPECT_DOUBLE_EQ(StepInNs(s, cfg), one + 2 * 115.0);
  s.route = RouteKind::kHbm;
  s.in_transfers = 1;
  const double hbm = StepInNs(s, cfg);
  s.in_transfers = 2;
  EXPECT_DOUBLE_EQ(StepInNs(s, cfg), hbm + 115.0 + 88.0);
}

TEST(Json, PlanMappingSchedule) {
  const MachineConfig cfg = DefaultMachineConfig();
  const nlohmann::json p = PlanToJson(PlanGemmTiling(64, 64, 64, Format::kFP32, cfg));
  EXPECT_EQ(p["spatial_dim"], "M");
  EXPECT_TRUE(p.contains("tile_shape"));
  EXPECT_EQ(MappingToJson(PlanMhaMapping(4, cfg))["assignments"].size(), 4u);
  EXPECT_EQ(ScheduleToJson(BuildReductionSchedule(cfg))["levels"], 4);
}

}  // namespace
}  // namespace fmsim
