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

#include "fmsim/machine.h"

#include <bit>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

namespace fmsim {
namespace {

using nlohmann::json;

[[noreturn]] void FieldError(const std::string& field,
                             const std::string& what) {
  throw std::invalid_argument("machine config field '" + field + "': " +
                              what);
}

template <typename T>
T Get(const json& j, const std::string& field) {
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    FieldError(field, e.what());
  }
}

void ReadEfficiency(const json& j, const std::string& prefix,
                    IsaEfficiency& eff) {
  if (!j.is_object()) FieldError(prefix, "expected an object");
  for (const auto& [key, value] : j.items()) {
    const std::string field = prefix + "." + key;
    if (key == "elementwise") {
      eff.elementwise = Get<double>(value, field);
    } else if (key == "gemm") {
      if (!value.is_object()) FieldError(field, "expected an object");
      for (const auto& [fmt, v] : value.items()) {
        Format f;
        try {
          f = ParseFormat(fmt);
        } catch (const std::invalid_argument& e) {
          FieldError(field + "." + fmt, e.what());
        }
        eff.gemm[static_cast<size_t>(f)] = Get<double>(v, field + "." + fmt);
      }
    } else {
      FieldError(field, "unknown key");
    }
  }
}

json EfficiencyToJson(const IsaEfficiency& eff) {
  json gemm = json::object();
  for (Format f : kAllFormats) gemm[std::string(FormatName(f))] = eff.Gemm(f);
  return {{"gemm", gemm}, {"elementwise", eff.elementwise}};
}

IsaEfficiency Scaled(const IsaEfficiency& eff, double factor) {
  IsaEfficiency out = eff;
  for (double& g : out.gemm) g *= factor;
  out.elementwise *= factor;
  return out;
}

}  // namespace

std::string_view IsaModeName(IsaMode mode) {
  return mode == IsaMode::kSsrFrep ? "ssr_frep" : "baseline";
}

IsaMode ParseIsaMode(std::string_view name) {
  if (name == "baseline") return IsaMode::kBaseline;
  if (name == "ssr_frep" || name == "ssr-frep") return IsaMode::kSsrFrep;
  throw std::invalid_argument("unknown isa mode '" + std::string(name) +
                              "'; valid modes: baseline, ssr-frep");
}

void MachineConfig::Validate() const {
  auto positive = [](double v, const char* field) {
    if (!(v > 0) || !std::isfinite(v)) FieldError(field, "must be positive");
  };
  positive(clusters_per_group, "clusters_per_group");
  positive(groups, "groups");
  positive(compute_cores_per_cluster, "compute_cores_per_cluster");
  positive(static_cast<double>(spm_bytes), "spm_bytes");
  positive(freq_hz, "freq_hz");
  positive(bw_spm, "bw_spm");
  positive(bw_cluster_xbar_per_link, "bw_cluster_xbar_per_link");
  positive(bw_group_xbar_per_link, "bw_group_xbar_per_link");
  positive(bw_hbm_total, "bw_hbm_total");
  positive(dma_bytes_per_cycle, "dma_bytes_per_cycle");
  if (dma_setup_ns < 0) FieldError("dma_setup_ns", "must be non-negative");
  if (dma_static_ns < 0) FieldError("dma_static_ns", "must be non-negative");
  if (hbm_roundtrip_ns < 0) {
    FieldError("hbm_roundtrip_ns", "must be non-negative");
  }
  for (Format f : kAllFormats) {
    positive(Peak(f), "peak_flop_per_cycle_per_cluster");
  }
  for (const auto* eff : {&ssr_frep_efficiency, &baseline_efficiency}) {
    for (double g : eff->gemm) {
      if (!(g > 0 && g <= 1)) FieldError("isa_efficiency", "must be in (0, 1]");
    }
    if (!(eff->elementwise > 0 && eff->elementwise <= 1)) {
      FieldError("isa_efficiency", "must be in (0, 1]");
    }
  }
  if (step_overhead_cycles < 0) {
    FieldError("step_overhead_cycles", "must be non-negative");
  }
}

MachineConfig DefaultMachineConfig() {
  MachineConfig cfg;
  // Indexed by Format: fp64, fp32, fp16, bf16, fp8e4m3, fp8e5m2.
  cfg.ssr_frep_efficiency.gemm = {0.84, 0.90, 0.80, 0.80, 0.72, 0.72};
  cfg.ssr_frep_efficiency.elementwise = 1.0;
  cfg.baseline_efficiency = Scaled(cfg.ssr_frep_efficiency, 1.0 / 4.5);
  return cfg;
}

MachineConfig WithClusters(MachineConfig cfg, int clusters) {
  if (clusters < 1) FieldError("clusters", "must be at least 1");
  if (clusters <= 4) {
    cfg.clusters_per_group = clusters;
    cfg.groups = 1;
  } else {
    if (clusters % 4 != 0) {
      FieldError("clusters", "counts above 4 must be a multiple of 4");
    }
    cfg.clusters_per_group = 4;
    cfg.groups = clusters / 4;
  }
  return cfg;
}

MachineConfig MachineConfigFromJson(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("machine config: expected a JSON object");
  MachineConfig cfg = DefaultMachineConfig();
  for (const auto& [key, value] : j.items()) {
    if (key == "clusters_per_group") {
      cfg.clusters_per_group = Get<int>(value, key);
    } else if (key == "groups") {
      cfg.groups = Get<int>(value, key);
    } else if (key == "compute_cores_per_cluster") {
      cfg.compute_cores_per_cluster = Get<int>(value, key);
    } else if (key == "spm_bytes") {
      cfg.spm_bytes = Get<int64_t>(value, key);
    } else if (key == "freq_hz") {
      cfg.freq_hz = Get<double>(value, key);
    } else if (key == "peak_flop_per_cycle_per_cluster") {
      if (!value.is_object()) FieldError(key, "expected an object");
      for (const auto& [fmt, v] : value.items()) {
        Format f;
        try {
          f = ParseFormat(fmt);
        } catch (const std::invalid_argument& e) {
          FieldError(key + "." + fmt, e.what());
        }
        cfg.peak_flop_per_cycle_per_cluster[static_cast<size_t>(f)] =
            Get<double>(v, key + "." + fmt);
      }
    } else if (key == "bw_spm") {
      cfg.bw_spm = Get<double>(value, key);
    } else if (key == "bw_cluster_xbar_per_link") {
      cfg.bw_cluster_xbar_per_link = Get<double>(value, key);
    } else if (key == "bw_group_xbar_per_link") {
      cfg.bw_group_xbar_per_link = Get<double>(value, key);
    } else if (key == "bw_hbm_total") {
      cfg.bw_hbm_total = Get<double>(value, key);
    } else if (key == "dma_bytes_per_cycle") {
      cfg.dma_bytes_per_cycle = Get<double>(value, key);
    } else if (key == "dma_setup_ns") {
      cfg.dma_setup_ns = Get<double>(value, key);
    } else if (key == "dma_static_ns") {
      cfg.dma_static_ns = Get<double>(value, key);
    } else if (key == "hbm_roundtrip_ns") {
      cfg.hbm_roundtrip_ns = Get<double>(value, key);
    } else if (key == "isa_mode") {
      try {
        cfg.isa_mode = ParseIsaMode(Get<std::string>(value, key));
      } catch (const std::invalid_argument& e) {
        FieldError(key, e.what());
      }
    } else if (key == "isa_efficiency") {
      if (!value.is_object()) FieldError(key, "expected an object");
      for (const auto& [mode, eff] : value.items()) {
        if (mode == "ssr_frep") {
          ReadEfficiency(eff, key + "." + mode, cfg.ssr_frep_efficiency);
        } else if (mode == "baseline") {
          ReadEfficiency(eff, key + "." + mode, cfg.baseline_efficiency);
        } else {
          FieldError(key + "." + mode, "unknown isa mode");
        }
      }
    } else if (key == "activation_costs") {
      if (!value.is_object()) FieldError(key, "expected an object");
      ActivationCosts& a = cfg.activation;
      for (const auto& [name, v] : value.items()) {
        const std::string field = key + "." + name;
        double* slot = name == "layernorm_flops"  ? &a.layernorm_flops
                       : name == "gelu_flops"     ? &a.gelu_flops
                       : name == "softmax_flops"  ? &a.softmax_flops
                       : name == "layernorm_ops"  ? &a.layernorm_ops
                       : name == "gelu_ops"       ? &a.gelu_ops
                       : name == "softmax_ops"    ? &a.softmax_ops
                       : name == "rescale_ops"    ? &a.rescale_ops
                       : name == "conversion_ops" ? &a.conversion_ops
                                                  : nullptr;
        if (slot == nullptr) FieldError(field, "unknown key");
        *slot = Get<double>(v, field);
      }
    } else if (key == "step_overhead_cycles") {
      cfg.step_overhead_cycles = Get<double>(value, key);
    } else {
      FieldError(key, "unknown key");
    }
  }
  cfg.Validate();
  return cfg;
}

json MachineConfigToJson(const MachineConfig& cfg) {
  json peaks = json::object();
  for (Format f : kAllFormats) peaks[std::string(FormatName(f))] = cfg.Peak(f);
  const ActivationCosts& a = cfg.activation;
  return {
      {"clusters_per_group", cfg.clusters_per_group},
      {"groups", cfg.groups},
      {"compute_cores_per_cluster", cfg.compute_cores_per_cluster},
      {"spm_bytes", cfg.spm_bytes},
      {"freq_hz", cfg.freq_hz},
      {"peak_flop_per_cycle_per_cluster", peaks},
      {"bw_spm", cfg.bw_spm},
      {"bw_cluster_xbar_per_link", cfg.bw_cluster_xbar_per_link},
      {"bw_group_xbar_per_link", cfg.bw_group_xbar_per_link},
      {"bw_hbm_total", cfg.bw_hbm_total},
      {"dma_bytes_per_cycle", cfg.dma_bytes_per_cycle},
      {"dma_setup_ns", cfg.dma_setup_ns},
      {"dma_static_ns", cfg.dma_static_ns},
      {"hbm_roundtrip_ns", cfg.hbm_roundtrip_ns},
      {"isa_mode", std::string(IsaModeName(cfg.isa_mode))},
      {"isa_efficiency",
       {{"ssr_frep", EfficiencyToJson(cfg.ssr_frep_efficiency)},
        {"baseline", EfficiencyToJson(cfg.baseline_efficiency)}}},
      {"activation_costs",
       {{"layernorm_flops", a.layernorm_flops},
        {"gelu_flops", a.gelu_flops},
        {"softmax_flops", a.softmax_flops},
        {"layernorm_ops", a.layernorm_ops},
        {"gelu_ops", a.gelu_ops},
        {"softmax_ops", a.softmax_ops},
        {"rescale_ops", a.rescale_ops},
        {"conversion_ops", a.conversion_ops}}},
      {"step_overhead_cycles", cfg.step_overhead_cycles},
  };
}

MachineConfig LoadMachineConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open machine config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw std::invalid_argument("machine config " + path + ": " + e.what());
  }
  return MachineConfigFromJson(j);
}

RouteKind Route::Kind(const MachineConfig& cfg) const {
  if (src == dst) throw std::invalid_argument("route: src equals dst");
  const bool src_hbm = src.kind == Endpoint::Kind::kHbm;
  const bool dst_hbm = dst.kind == Endpoint::Kind::kHbm;
  if (src_hbm && dst_hbm) throw std::invalid_argument("route: HBM to HBM");
  if (src_hbm || dst_hbm) return RouteKind::kHbm;
  const int n = cfg.total_clusters();
  if (src.cluster < 0 || src.cluster >= n || dst.cluster < 0 ||
      dst.cluster >= n) {
    throw std::invalid_argument("route: cluster id out of range");
  }
  return cfg.GroupOf(src.cluster) == cfg.GroupOf(dst.cluster)
             ? RouteKind::kIntraGroup
             : RouteKind::kInterGroup;
}

double EffectiveBandwidth(RouteKind kind, const MachineConfig& cfg,
                          double hbm_requesters) {
  const double dma = cfg.dma_bytes_per_cycle * cfg.freq_hz;
  double cap = 0;
  switch (kind) {
    case RouteKind::kHbm:
      cap = cfg.bw_hbm_total / std::max(hbm_requesters, 1.0);
      break;
    case RouteKind::kIntraGroup:
      cap = cfg.bw_cluster_xbar_per_link;
      break;
    case RouteKind::kInterGroup:
      cap = cfg.bw_group_xbar_per_link;
      break;
  }
  return std::min(dma, cap);
}

double DmaTime(double bytes, RouteKind kind, const MachineConfig& cfg,
               double hbm_requesters) {
  if (bytes < 0) throw std::invalid_argument("DmaTime: negative byte count");
  double ns = cfg.dma_static_ns +
              bytes / EffectiveBandwidth(kind, cfg, hbm_requesters) * 1e9;
  if (kind == RouteKind::kHbm) ns += cfg.hbm_roundtrip_ns;
  return ns;
}

double DmaTime(double bytes, const Route& route, const MachineConfig& cfg,
               double hbm_requesters) {
  return DmaTime(bytes, route.Kind(cfg), cfg, hbm_requesters);
}

double ComputeCycles(double flops, Format fmt, int n_clusters,
                     const MachineConfig& cfg, KernelClass cls) {
  if (flops < 0) throw std::invalid_argument("ComputeCycles: negative flops");
  if (n_clusters < 1) {
    throw std::invalid_argument("ComputeCycles: need at least one cluster");
  }
  const IsaEfficiency& eff = cfg.Efficiency();
  const double e = cls == KernelClass::kGemm ? eff.Gemm(fmt) : eff.elementwise;
  return flops / (cfg.Peak(fmt) * n_clusters) / e;
}

double ElementwiseCycles(double elements, double ops_per_element,
                         Format op_fmt, const MachineConfig& cfg) {
  const double lanes_per_cycle =
      static_cast<double>(cfg.compute_cores_per_cluster) * SimdLanes(op_fmt);
  return elements * ops_per_element / lanes_per_cycle /
         cfg.Efficiency().elementwise;
}

int ReductionLevels(const MachineConfig& cfg) {
  const int n = cfg.total_clusters();
  if (n < 1 || !std::has_single_bit(static_cast<unsigned>(n))) {
    throw std::invalid_argument(
        "tree reduction needs a power-of-two cluster count, got " +
        std::to_string(n));
  }
  return std::countr_zero(static_cast<unsigned>(n));
}

}  // namespace fmsim
