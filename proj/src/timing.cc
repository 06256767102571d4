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

#include "fmsim/timing.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace fmsim {
namespace {

int64_t CeilDiv(int64_t a, int64_t b) { return (a + b - 1) / b; }

double ElementwiseNs(double elements, double ops, Format op_fmt,
                     const MachineConfig& cfg) {
  return CyclesToNs(ElementwiseCycles(elements, ops, op_fmt, cfg), cfg);
}

// Streams `bytes` over one route in SPM-sized chunks, each paying the
// per-transfer latency.
double StreamNs(double bytes, RouteKind route, double requesters,
                const MachineConfig& cfg) {
  if (bytes <= 0) return 0.0;
  const double chunk = static_cast<double>(cfg.spm_bytes) / 4;
  const double transfers = std::ceil(bytes / chunk);
  const double latency =
      cfg.dma_static_ns +
      (route == RouteKind::kHbm ? cfg.hbm_roundtrip_ns : 0.0);
  return transfers * latency +
         bytes / EffectiveBandwidth(route, cfg, requesters) * 1e9;
}

}  // namespace

std::string_view CategoryName(Category c) {
  switch (c) {
    case Category::kGemm:
      return "gemm";
    case Category::kFlashAttention:
      return "flash_attention2";
    case Category::kLayerNorm:
      return "layernorm";
    case Category::kGelu:
      return "gelu";
    case Category::kConversions:
      return "conversions";
  }
  return "unknown";
}

double Breakdown::total() const {
  double t = 0;
  for (double v : ns) t += v;
  return t;
}

Breakdown& Breakdown::operator+=(const Breakdown& o) {
  for (size_t i = 0; i < kNumCategories; ++i) ns[i] += o.ns[i];
  return *this;
}

Breakdown Breakdown::Scaled(double factor) const {
  Breakdown out = *this;
  for (double& v : out.ns) v *= factor;
  return out;
}

PhaseTiming GemmTiming(const TilingPlan& plan, const GemmIo& io,
                       const MachineConfig& cfg) {
  const int64_t rows =
      plan.spatial_dim == SpatialDim::kM ? plan.PartExtent() : plan.M;
  const int64_t depth =
      plan.spatial_dim == SpatialDim::kK ? plan.PartExtent() : plan.K;
  const double a = ByteWidth(plan.in_fmt);
  const double c = ByteWidth(io.out_fmt);
  const Ranges m_tiles = TileRanges(rows, plan.tile.m);
  const Ranges n_tiles = TileRanges(plan.N, plan.tile.n);
  const Ranges k_tiles = TileRanges(depth, plan.tile.k);
  const double n = io.concurrent_clusters;

  std::vector<PhaseStep> steps;
  steps.reserve(m_tiles.size() * n_tiles.size() * k_tiles.size());
  for (const auto& [mo, ml] : m_tiles) {
    for (const auto& [no, nl] : n_tiles) {
      for (size_t ki = 0; ki < k_tiles.size(); ++ki) {
        const int64_t kl = k_tiles[ki].second;
        PhaseStep s;
        s.compute_cycles =
            ComputeCycles(2.0 * ml * nl * kl, plan.in_fmt, 1, cfg) +
            cfg.step_overhead_cycles;
        const double a_bytes = io.load_a ? ml * kl * a : 0.0;
        const double b_bytes = kl * nl * a;
        s.dma_in_bytes = a_bytes + b_bytes;
        s.in_transfers = io.load_a ? 2 : 1;
        const bool last_k = ki + 1 == k_tiles.size();
        s.dma_out_bytes = io.store_c && last_k ? ml * nl * c : 0.0;
        s.out_transfers = 1;
        const double unique = n * a_bytes / io.a_sharers +
                              n * b_bytes / io.b_sharers;
        s.hbm_requesters = std::max(1.0, unique / s.dma_in_bytes);
        steps.push_back(s);
      }
    }
  }
  return SimulatePhases(steps, cfg);
}

PhaseTiming SpatialGemmTiming(int64_t M, int64_t N, int64_t K, Format fmt,
                              const MachineConfig& cfg,
                              TilingPlan* plan_out) {
  const TilingPlan plan = PlanGemmTiling(M, N, K, fmt, cfg, SpatialDim::kM);
  if (plan_out != nullptr) *plan_out = plan;
  GemmIo io;
  io.concurrent_clusters = plan.spatial_parts;
  io.a_sharers = 1;
  io.b_sharers = plan.spatial_parts;
  io.out_fmt = fmt;
  return GemmTiming(plan, io, cfg);
}

AttentionBlocks PlanAttentionBlocks(int64_t s1, int64_t s2, int64_t p,
                                    Format fmt, const MachineConfig& cfg) {
  const Format stats = StatsFormat(fmt);
  const int64_t a = ByteWidth(fmt), st = ByteWidth(stats);
  const bool convert = fmt != stats;
  auto fits = [&](int64_t br, int64_t bc) {
    const int64_t bytes = br * p * a + 4 * bc * p * a + br * bc * st +
                          (convert ? br * bc * a : 0) + br * p * st +
                          2 * br * st;
    return bytes <= cfg.spm_bytes;
  };
  AttentionBlocks b;
  if (!fits(1, 1)) {
    throw std::invalid_argument("attention head does not fit the scratchpad");
  }
  while (b.br < s1 && b.bc < s2 && fits(b.br + 1, b.bc + 1)) {
    ++b.br;
    ++b.bc;
  }
  while (b.bc < s2 && fits(b.br, b.bc + 1)) ++b.bc;
  while (b.br < s1 && fits(b.br + 1, b.bc)) ++b.br;
  return b;
}

AttentionCost FlashAttentionTiming(int64_t s1, int64_t s2, int64_t p,
                                   bool causal, Format fmt,
                                   double hbm_requesters,
                                   const MachineConfig& cfg) {
  const AttentionBlocks blk = PlanAttentionBlocks(s1, s2, p, fmt, cfg);
  const Format stats = StatsFormat(fmt);
  const ActivationCosts& act = cfg.activation;
  const double a = ByteWidth(fmt);
  const bool convert = fmt != stats;
  AttentionCost cost;
  std::vector<PhaseStep> steps;
  for (const auto& [r0, rl] : TileRanges(s1, blk.br)) {
    const int64_t last_row = r0 + rl - 1 + (s2 - s1);
    bool first = true;
    PhaseStep* last = nullptr;
    for (const auto& [c0, cl] : TileRanges(s2, blk.bc)) {
      if (causal && c0 > last_row) break;  // fully masked from here on
      const double gemm =
          ComputeCycles(4.0 * rl * cl * p, fmt, 1, cfg);
      double elem = ElementwiseCycles(rl * cl, act.softmax_ops, stats, cfg) +
                    ElementwiseCycles(rl * p, act.rescale_ops, stats, cfg);
      if (convert) {
        elem += ElementwiseCycles(rl * cl, act.conversion_ops, stats, cfg);
      }
      cost.gemm_ns += CyclesToNs(gemm, cfg);
      cost.elementwise_ns += CyclesToNs(elem, cfg);
      PhaseStep s;
      s.compute_cycles = gemm + elem + cfg.step_overhead_cycles;
      s.dma_in_bytes = 2.0 * cl * p * a + (first ? rl * p * a : 0.0);
      s.in_transfers = first ? 3 : 2;
      s.dma_out_bytes = 0;
      s.hbm_requesters = hbm_requesters;
      steps.push_back(s);
      last = &steps.back();
      first = false;
    }
    // Normalization by l and the output write close the row block.
    last->compute_cycles +=
        ElementwiseCycles(rl * p, 1 + (convert ? act.conversion_ops : 0),
                          stats, cfg);
    last->dma_out_bytes = rl * p * a;
  }
  cost.total_ns = SimulatePhases(steps, cfg).total_ns;
  return cost;
}

PhaseTiming ElementwiseTiming(int64_t rows, int64_t cols,
                              double ops_per_element, Format io_fmt,
                              bool write_back, const MachineConfig& cfg) {
  const int parts =
      static_cast<int>(std::min<int64_t>(cfg.total_clusters(), rows));
  const int64_t my_rows = CeilDiv(rows, parts);
  const int64_t a = ByteWidth(io_fmt);
  const int64_t row_bytes = cols * a * (write_back ? 4 : 2);
  const int64_t chunk = std::max<int64_t>(1, cfg.spm_bytes / row_bytes);
  std::vector<PhaseStep> steps;
  for (const auto& [r0, rl] : TileRanges(my_rows, chunk)) {
    (void)r0;
    PhaseStep s;
    s.compute_cycles = ElementwiseCycles(rl * cols, ops_per_element,
                                         StatsFormat(io_fmt), cfg) +
                       cfg.step_overhead_cycles;
    s.dma_in_bytes = rl * cols * a;
    s.dma_out_bytes = write_back ? rl * cols * a : 0.0;
    s.hbm_requesters = parts;
    steps.push_back(s);
  }
  return SimulatePhases(steps, cfg);
}

double ReductionTiming(int64_t rows, int64_t cols, Format acc_fmt,
                       Format out_fmt, const MachineConfig& cfg) {
  const int participants =
      static_cast<int>(std::bit_ceil(static_cast<unsigned>(cfg.total_clusters())));
  const ReductionSchedule schedule =
      BuildReductionSchedule(participants, cfg.clusters_per_group);
  const double elements = static_cast<double>(rows) * cols;
  const double bytes = elements * ByteWidth(acc_fmt);
  double ns = 0;
  for (int level = 1; level <= schedule.levels; ++level) {
    const auto it = std::find_if(
        schedule.steps.begin(), schedule.steps.end(),
        [level](const ReductionStep& s) { return s.level == level; });
    const RouteKind route =
        it->intra_group ? RouteKind::kIntraGroup : RouteKind::kInterGroup;
    ns += StreamNs(bytes, route, 1, cfg) +
          ElementwiseNs(elements, 1, acc_fmt, cfg);
  }
  return ns + StreamNs(elements * ByteWidth(out_fmt), RouteKind::kHbm, 1, cfg);
}

BlockTiming TimeBlock(const ModelConfig& m, int64_t queries, int64_t keys,
                      bool causal, Format fmt, bool fused,
                      const MachineConfig& cfg) {
  const int n = cfg.total_clusters();
  const Format stats = StatsFormat(fmt);
  const Format acc = DefaultAccumulator(fmt);
  const ActivationCosts& act = cfg.activation;
  const int64_t S = queries;
  const int64_t my_rows = CeilDiv(S, std::min<int64_t>(n, S));
  BlockTiming bt;
  Breakdown& b = bt.breakdown;

  // Multi-head attention.
  const HeadMapping mapping = PlanMhaMapping(static_cast<int>(m.H), cfg);
  const double active = mapping.active_clusters;
  if (fused) {
    const TilingPlan qkv_plan = PlanGemmTiling(
        S, 3 * m.P, m.E, fmt, acc, cfg, SpatialDim::kNone, 1);
    GemmIo qkv_io;
    qkv_io.concurrent_clusters = mapping.active_clusters;
    qkv_io.a_sharers = active;
    qkv_io.out_fmt = fmt;
    const double qkv = GemmTiming(qkv_plan, qkv_io, cfg).total_ns;
    const double fa =
        FlashAttentionTiming(S, keys, m.P, causal, fmt, active, cfg).total_ns;
    const TilingPlan out_plan = PlanGemmTiling(
        S, m.E, m.P, fmt, acc, cfg, SpatialDim::kNone, 1);
    GemmIo out_io;
    out_io.concurrent_clusters = mapping.active_clusters;
    out_io.store_c = false;
    out_io.out_fmt = acc;
    const double out = GemmTiming(out_plan, out_io, cfg).total_ns;
    double mha = mapping.slots * (qkv + fa + out);
    // A cluster running several slots folds its partial through HBM.
    const double partial_bytes =
        static_cast<double>(S) * m.E * ByteWidth(acc);
    mha += (mapping.slots - 1) *
           (2 * StreamNs(partial_bytes, RouteKind::kHbm, active, cfg) +
            ElementwiseNs(static_cast<double>(S) * m.E, 1, acc, cfg));
    mha += ReductionTiming(S, m.E, acc, fmt, cfg);
    b[Category::kFlashAttention] += mha;
  } else {
    b[Category::kGemm] += SpatialGemmTiming(S, 3 * m.HP(), m.E, fmt, cfg).total_ns;
    const double fa =
        FlashAttentionTiming(S, keys, m.P, causal, fmt, active, cfg).total_ns;
    // The score matrix of every head is written out and read back.
    const double scores = static_cast<double>(S) * keys * ByteWidth(fmt);
    const double spill = 2 * StreamNs(scores, RouteKind::kHbm, active, cfg);
    b[Category::kFlashAttention] += mapping.slots * (fa + spill);
    b[Category::kGemm] += SpatialGemmTiming(S, m.E, m.HP(), fmt, cfg).total_ns;
  }

  // LayerNorm, statistics in the stats format.
  const double ln_ops =
      act.layernorm_ops + (fmt != stats ? 2 * act.conversion_ops : 0.0);
  b[Category::kLayerNorm] +=
      ElementwiseTiming(S, m.E, ln_ops, fmt, true, cfg).total_ns;

  // MLP.
  b[Category::kGemm] += SpatialGemmTiming(S, m.FF, m.E, fmt, cfg).total_ns;
  const double mlp_elements = static_cast<double>(my_rows) * m.FF;
  if (fused) {
    b[Category::kGelu] += ElementwiseNs(mlp_elements, act.gelu_ops, stats, cfg);
  } else {
    b[Category::kGelu] +=
        ElementwiseTiming(S, m.FF, act.gelu_ops, fmt, true, cfg).total_ns;
  }
  const int conversions = fmt == stats ? 0 : (acc == stats ? 1 : 2);
  if (conversions > 0) {
    b[Category::kConversions] += ElementwiseNs(
        mlp_elements, conversions * act.conversion_ops, stats, cfg);
  }
  b[Category::kGemm] += SpatialGemmTiming(S, m.E, m.FF, fmt, cfg).total_ns;
  return bt;
}

}  // namespace fmsim
