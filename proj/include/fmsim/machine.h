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

#ifndef FMSIM_MACHINE_H_
#define FMSIM_MACHINE_H_

// Parameters of the hierarchical many-cluster machine and the primitive
// cost functions built on them (DMA time, compute cycles).

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "fmsim/numerics.h"
#include "json.hpp"

namespace fmsim {

enum class IsaMode : uint8_t { kBaseline, kSsrFrep };

std::string_view IsaModeName(IsaMode mode);  // "baseline" / "ssr_frep"
// Accepts "baseline", "ssr_frep" and "ssr-frep".
IsaMode ParseIsaMode(std::string_view name);

// Fraction of peak the inner loops reach in one ISA mode.
struct IsaEfficiency {
  std::array<double, 6> gemm{};  // indexed by Format
  double elementwise = 1.0;

  double Gemm(Format fmt) const { return gemm[static_cast<size_t>(fmt)]; }
};

// Operation counts per element for the non-GEMM kernels. `*_flops` feed
// FLOP accounting; `*_ops` feed timing (exp is costly in software).
struct ActivationCosts {
  double layernorm_flops = 8;
  double gelu_flops = 7;
  double softmax_flops = 5;
  double layernorm_ops = 8;
  double gelu_ops = 7;
  double softmax_ops = 12;
  double rescale_ops = 1;
  double conversion_ops = 1;
};

struct MachineConfig {
  int clusters_per_group = 4;
  int groups = 4;
  int compute_cores_per_cluster = 8;
  int64_t spm_bytes = 131072;
  double freq_hz = 1e9;
  std::array<double, 6> peak_flop_per_cycle_per_cluster = {16, 32, 64,
                                                           64, 128, 128};
  double bw_spm = 256e9;
  double bw_cluster_xbar_per_link = 64e9;
  double bw_group_xbar_per_link = 64e9;
  double bw_hbm_total = 410e9;
  double dma_bytes_per_cycle = 56;
  double dma_setup_ns = 27;
  double dma_static_ns = 115;
  double hbm_roundtrip_ns = 88;
  IsaMode isa_mode = IsaMode::kSsrFrep;

  // Calibration.
  IsaEfficiency ssr_frep_efficiency;
  IsaEfficiency baseline_efficiency;
  ActivationCosts activation;
  double step_overhead_cycles = 100;  // barrier + DMA handshake per tile

  int total_clusters() const { return clusters_per_group * groups; }
  double Peak(Format fmt) const {
    return peak_flop_per_cycle_per_cluster[static_cast<size_t>(fmt)];
  }
  const IsaEfficiency& Efficiency() const {
    return isa_mode == IsaMode::kSsrFrep ? ssr_frep_efficiency
                                         : baseline_efficiency;
  }
  int GroupOf(int cluster) const { return cluster / clusters_per_group; }
  // Throws std::invalid_argument naming the offending field.
  void Validate() const;
};

// The 16-cluster (C=4, G=4) configuration with default calibration.
MachineConfig DefaultMachineConfig();
// Splits `clusters` into C <= 4 per group and G groups.
MachineConfig WithClusters(MachineConfig cfg, int clusters);

MachineConfig MachineConfigFromJson(const nlohmann::json& j);
nlohmann::json MachineConfigToJson(const MachineConfig& cfg);
MachineConfig LoadMachineConfig(const std::string& path);

enum class RouteKind : uint8_t { kHbm, kIntraGroup, kInterGroup };

struct Endpoint {
  enum class Kind : uint8_t { kHbm, kSpm } kind = Kind::kHbm;
  int cluster = 0;  // SPM only

  static Endpoint Hbm() { return {Kind::kHbm, 0}; }
  static Endpoint Spm(int c) { return {Kind::kSpm, c}; }
  bool operator==(const Endpoint&) const = default;
};

struct Route {
  Endpoint src;
  Endpoint dst;

  // Throws std::invalid_argument for src == dst or HBM to HBM.
  RouteKind Kind(const MachineConfig& cfg) const;
};

// Bytes/s a single transfer achieves: the per-cluster DMA rate capped by
// the route's link, or by an even share of HBM among `hbm_requesters`.
double EffectiveBandwidth(RouteKind kind, const MachineConfig& cfg,
                          double hbm_requesters = 1.0);

// Static overhead + transfer time (+ HBM roundtrip on HBM routes), in ns.
double DmaTime(double bytes, RouteKind kind, const MachineConfig& cfg,
               double hbm_requesters = 1.0);
double DmaTime(double bytes, const Route& route, const MachineConfig& cfg,
               double hbm_requesters = 1.0);

enum class KernelClass : uint8_t { kGemm, kElementwise };

// flops / (peak[fmt] * n_clusters) / efficiency(isa_mode, fmt).
double ComputeCycles(double flops, Format fmt, int n_clusters,
                     const MachineConfig& cfg,
                     KernelClass cls = KernelClass::kGemm);

// Cycles for `elements * ops_per_element` scalar operations spread over the
// compute cores of one cluster, using the SIMD lanes of `op_fmt`.
double ElementwiseCycles(double elements, double ops_per_element,
                         Format op_fmt, const MachineConfig& cfg);

// log2(C * G). Throws std::invalid_argument when not a power of two.
int ReductionLevels(const MachineConfig& cfg);

inline double CyclesToNs(double cycles, const MachineConfig& cfg) {
  return cycles * 1e9 / cfg.freq_hz;
}

}  // namespace fmsim

#endif  // FMSIM_MACHINE_H_
