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

#ifndef FMSIM_TIMING_H_
#define FMSIM_TIMING_H_

// Kernel cost estimators at full model scale. Nothing is materialized;
// shapes are turned into pipeline steps and run through SimulatePhases.

#include <array>
#include <cstdint>
#include <string_view>

#include "fmsim/machine.h"
#include "fmsim/models.h"
#include "fmsim/numerics.h"
#include "fmsim/scheduler.h"

namespace fmsim {

enum class Category : uint8_t {
  kGemm,
  kFlashAttention,
  kLayerNorm,
  kGelu,
  kConversions,
};
inline constexpr size_t kNumCategories = 5;
// "gemm", "flash_attention2", "layernorm", "gelu", "conversions".
std::string_view CategoryName(Category c);

struct Breakdown {
  std::array<double, kNumCategories> ns{};

  double& operator[](Category c) { return ns[static_cast<size_t>(c)]; }
  double operator[](Category c) const { return ns[static_cast<size_t>(c)]; }
  double total() const;
  Breakdown& operator+=(const Breakdown& o);
  Breakdown Scaled(double factor) const;
};

// How the clusters running a GEMM share HBM. Every cluster loads an A and
// a B tile per step; a tile shared by `k` clusters is read from HBM once
// and broadcast, so it counts 1/k per cluster.
struct GemmIo {
  int concurrent_clusters = 1;
  double a_sharers = 1;
  double b_sharers = 1;
  bool load_a = true;   // false when A is already resident in the SPM
  bool store_c = true;  // false when C leaves through the reduction tree
  Format out_fmt = Format::kFP64;
};

// Time of the busiest spatial part of `plan`.
PhaseTiming GemmTiming(const TilingPlan& plan, const GemmIo& io,
                       const MachineConfig& cfg);

// M-spatial GEMM over all clusters with B broadcast, output in in_fmt.
PhaseTiming SpatialGemmTiming(int64_t M, int64_t N, int64_t K, Format fmt,
                              const MachineConfig& cfg,
                              TilingPlan* plan_out = nullptr);

// Query/key block sizes of one attention head in one cluster's SPM.
struct AttentionBlocks {
  int64_t br = 1;
  int64_t bc = 1;
};
AttentionBlocks PlanAttentionBlocks(int64_t s1, int64_t s2, int64_t p,
                                    Format fmt, const MachineConfig& cfg);

struct AttentionCost {
  double total_ns = 0;
  double gemm_ns = 0;         // QK^T and AV inner loops
  double elementwise_ns = 0;  // softmax, rescale, conversions
};

// FlashAttention-2 for one head on one cluster; Q is resident, K/V blocks
// stream from HBM, fully masked blocks are skipped.
AttentionCost FlashAttentionTiming(int64_t s1, int64_t s2, int64_t p,
                                   bool causal, Format fmt,
                                   double hbm_requesters,
                                   const MachineConfig& cfg);

// Rows of `cols` elements spread over all clusters, streamed through the
// SPM, with `ops_per_element` operations in the stats format.
PhaseTiming ElementwiseTiming(int64_t rows, int64_t cols,
                              double ops_per_element, Format io_fmt,
                              bool write_back, const MachineConfig& cfg);

// Tree reduction of an S x E partial per participant followed by the root
// writing the result to HBM.
double ReductionTiming(int64_t rows, int64_t cols, Format acc_fmt,
                       Format out_fmt, const MachineConfig& cfg);

struct BlockTiming {
  Breakdown breakdown;
  double total_ns() const { return breakdown.total(); }
};

// One transformer block (MHA, LayerNorm, MLP) for `queries` query rows
// against `keys` keys. Fused: head-mapped projections, FlashAttention-2
// and the concat + linear with tree reduction run as one kernel, and GELU
// rides in the first MLP GEMM. Unfused: every kernel round-trips HBM.
BlockTiming TimeBlock(const ModelConfig& m, int64_t queries, int64_t keys,
                      bool causal, Format fmt, bool fused,
                      const MachineConfig& cfg);

}  // namespace fmsim

#endif  // FMSIM_TIMING_H_
