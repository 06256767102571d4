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

#include "fmsim/runner.h"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "fmsim/scheduler.h"

namespace fmsim {
namespace {

using nlohmann::json;

RunReport Base(const ModelConfig& m, RunMode mode, Format fmt,
               const MachineConfig& cfg, bool fused) {
  cfg.Validate();
  RunReport r;
  r.model = m.name;
  r.mode = mode;
  r.fmt = fmt;
  r.clusters = cfg.total_clusters();
  r.fused = fused;
  r.isa_mode = cfg.isa_mode;
  r.calibration = CalibrationToJson(cfg);
  return r;
}

void Finish(RunReport& r, double flops, const MachineConfig& cfg) {
  r.total_ns = r.breakdown.total();
  r.flops = flops;
  const double seconds = r.total_ns * 1e-9;
  r.achieved_flops_per_s = seconds > 0 ? flops / seconds : 0.0;
  const double ideal_cycles = flops / (cfg.Peak(r.fmt) * cfg.total_clusters());
  const double cycles = r.total_ns * cfg.freq_hz * 1e-9;
  r.fpu_utilization = cycles > 0 ? ideal_cycles / cycles : 0.0;
  r.hbm_read_bytes = r.traffic.read_bytes;
  r.hbm_write_bytes = r.traffic.write_bytes;
  r.calibration["traffic_assumption"] = r.traffic.assumption;
}

void CheckSeq(const ModelConfig& m, int64_t s, const char* what) {
  if (s < m.seq_min || s > m.seq_max) {
    throw std::invalid_argument(
        std::string(what) + " " + std::to_string(s) + " outside [" +
        std::to_string(m.seq_min) + ", " + std::to_string(m.seq_max) +
        "] for " + m.name);
  }
}

std::string Fixed(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

std::string Number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

RunReport RunNar(const ModelConfig& m, int64_t S, Format fmt,
                 const MachineConfig& cfg, bool fused) {
  CheckSeq(m, S, "seq");
  RunReport r = Base(m, RunMode::kNar, fmt, cfg, fused);
  r.seq = S;
  r.breakdown = TimeBlock(m, S, S, /*causal=*/true, fmt, fused, cfg)
                    .breakdown.Scaled(m.blocks);
  r.traffic = HbmTraffic(m, RunMode::kNar, S, fused, fmt);
  Finish(r, CountFlops(m, RunMode::kNar, S, cfg.activation), cfg);
  r.throughput = S / (r.total_ns * 1e-9);
  return r;
}

RunReport RunArGenerate(const ModelConfig& m, int64_t prompt_len,
                        int64_t n_new, Format fmt, const MachineConfig& cfg,
                        bool fused) {
  if (prompt_len < 0) throw std::invalid_argument("seq must be >= 0 in ar mode");
  if (n_new < 1) throw std::invalid_argument("new-tokens must be >= 1");
  if (prompt_len + n_new > m.seq_max) {
    throw std::invalid_argument(
        "new-tokens: KV cache of " + std::to_string(prompt_len + n_new) +
        " exceeds seq_max " + std::to_string(m.seq_max) + " of " + m.name);
  }
  RunReport r = Base(m, RunMode::kAr, fmt, cfg, fused);
  r.seq = prompt_len;
  r.new_tokens = n_new;
  if (prompt_len > 0) {
    r.prefill_ns = TimeBlock(m, prompt_len, prompt_len, true, fmt, fused, cfg)
                       .total_ns() *
                   m.blocks;
  }
  double flops = 0;
  r.traffic = HbmTraffic(m, RunMode::kAr, prompt_len + 1, fused, fmt);
  r.traffic.read_bytes = r.traffic.write_bytes = 0;
  for (int64_t t = prompt_len; t < prompt_len + n_new; ++t) {
    r.breakdown += TimeBlock(m, 1, t + 1, true, fmt, fused, cfg)
                       .breakdown.Scaled(m.blocks);
    flops += CountFlops(m, RunMode::kAr, t + 1, cfg.activation);
    const TrafficReport step = HbmTraffic(m, RunMode::kAr, t + 1, fused, fmt);
    r.traffic.read_bytes += step.read_bytes;
    r.traffic.write_bytes += step.write_bytes;
  }
  Finish(r, flops, cfg);
  r.throughput = n_new / (r.total_ns * 1e-9);
  return r;
}

RunReport RunVit(const ModelConfig& m, Format fmt, const MachineConfig& cfg,
                 bool fused) {
  if (!m.is_vit()) {
    throw std::invalid_argument("model: " + m.name + " is not an encoder");
  }
  RunReport r = Base(m, RunMode::kVit, fmt, cfg, fused);
  const int64_t S = m.seq_default;
  r.seq = S;
  r.breakdown = TimeBlock(m, S, S, /*causal=*/false, fmt, fused, cfg)
                    .breakdown.Scaled(m.blocks);
  const int64_t patch_dim = m.patch_size * m.patch_size * m.channels;
  r.breakdown[Category::kGemm] +=
      SpatialGemmTiming(m.patches, m.E, patch_dim, fmt, cfg).total_ns;
  r.breakdown[Category::kGemm] +=
      SpatialGemmTiming(1, m.classes, m.E, fmt, cfg).total_ns;
  r.traffic = HbmTraffic(m, RunMode::kVit, S, fused, fmt);
  Finish(r, CountFlops(m, RunMode::kVit, S, cfg.activation), cfg);
  r.throughput = 1.0 / (r.total_ns * 1e-9);
  return r;
}

json DumpPlan(const ModelConfig& m, int64_t queries, Format fmt,
              const MachineConfig& cfg) {
  const Format acc = DefaultAccumulator(fmt);
  const AttentionBlocks blk =
      PlanAttentionBlocks(queries, queries, m.P, fmt, cfg);
  json j;
  j["qkv_projection_per_head"] = PlanToJson(PlanGemmTiling(
      queries, 3 * m.P, m.E, fmt, acc, cfg, SpatialDim::kNone, 1));
  j["attention_blocks"] = {{"br", blk.br}, {"bc", blk.bc}};
  j["concat_linear_per_head"] = PlanToJson(PlanGemmTiling(
      queries, m.E, m.P, fmt, acc, cfg, SpatialDim::kNone, 1));
  j["concat_linear_k_spatial"] = PlanToJson(PlanGemmTiling(
      queries, m.E, m.HP(), fmt, acc, cfg, SpatialDim::kK,
      static_cast<int>(std::min<int64_t>(m.H, cfg.total_clusters()))));
  j["mlp_expand"] = PlanToJson(
      PlanGemmTiling(queries, m.FF, m.E, fmt, cfg, SpatialDim::kM));
  j["mlp_contract"] = PlanToJson(
      PlanGemmTiling(queries, m.E, m.FF, fmt, cfg, SpatialDim::kM));
  j["head_mapping"] = MappingToJson(PlanMhaMapping(static_cast<int>(m.H), cfg));
  const int n = cfg.total_clusters();
  if (std::has_single_bit(static_cast<unsigned>(n))) {
    j["reduction_schedule"] = ScheduleToJson(BuildReductionSchedule(cfg));
  }
  return j;
}

json CalibrationToJson(const MachineConfig& cfg) {
  const json full = MachineConfigToJson(cfg);
  return {{"isa_mode", full["isa_mode"]},
          {"isa_efficiency", full["isa_efficiency"][full["isa_mode"].get<std::string>()]},
          {"activation_costs", full["activation_costs"]},
          {"step_overhead_cycles", cfg.step_overhead_cycles}};
}

json ReportToJson(const RunReport& r) {
  json breakdown = json::object(), share = json::object();
  const double total = r.breakdown.total();
  for (size_t i = 0; i < kNumCategories; ++i) {
    const std::string name(CategoryName(static_cast<Category>(i)));
    breakdown[name] = r.breakdown.ns[i];
    share[name] = total > 0 ? r.breakdown.ns[i] / total : 0.0;
  }
  json j = {{"model", r.model},
            {"mode", std::string(RunModeName(r.mode))},
            {"fmt", std::string(FormatName(r.fmt))},
            {"seq", r.seq},
            {"clusters", r.clusters},
            {"fused", r.fused},
            {"isa_mode", std::string(IsaModeName(r.isa_mode))},
            {"total_ns", r.total_ns},
            {"breakdown_ns", breakdown},
            {"breakdown_share", share},
            {"flops", r.flops},
            {"achieved_flops_per_s", r.achieved_flops_per_s},
            {"fpu_utilization", r.fpu_utilization},
            {"hbm_read_bytes", r.hbm_read_bytes},
            {"hbm_write_bytes", r.hbm_write_bytes},
            {"traffic", TrafficToJson(r.traffic)},
            {"calibration", r.calibration}};
  j[r.images() ? "images_per_s" : "tokens_per_s"] = r.throughput;
  if (r.mode == RunMode::kAr) {
    j["new_tokens"] = r.new_tokens;
    j["prefill_ns"] = r.prefill_ns;
  }
  j["speedup_vs_1_cluster"] =
      r.speedup_vs_1_cluster ? json(*r.speedup_vs_1_cluster) : json(nullptr);
  if (!r.plan.is_null()) j["plan"] = r.plan;
  return j;
}

std::string ReportToText(const RunReport& r) {
  std::ostringstream out;
  out << r.model << "  mode=" << RunModeName(r.mode)
      << "  fmt=" << FormatName(r.fmt) << "  seq=" << r.seq
      << "  clusters=" << r.clusters << "  isa=" << IsaModeName(r.isa_mode)
      << (r.fused ? "  fused" : "  unfused") << "\n";
  char line[128];
  std::snprintf(line, sizeof line, "%-18s %16s %8s\n", "kernel", "latency_ns",
                "share");
  out << line;
  const double total = r.breakdown.total();
  for (size_t i = 0; i < kNumCategories; ++i) {
    std::snprintf(line, sizeof line, "%-18s %16.1f %7.2f%%\n",
                  std::string(CategoryName(static_cast<Category>(i))).c_str(),
                  r.breakdown.ns[i],
                  total > 0 ? 100.0 * r.breakdown.ns[i] / total : 0.0);
    out << line;
  }
  std::snprintf(line, sizeof line, "%-18s %16.1f %7.2f%%\n", "total", total,
                100.0);
  out << line;
  out << (r.images() ? "images_per_s      " : "tokens_per_s      ")
      << Fixed(r.throughput, 3) << "\n";
  out << "fpu_utilization   " << Fixed(r.fpu_utilization, 4) << "\n";
  out << "achieved_gflops   " << Fixed(r.achieved_flops_per_s * 1e-9, 2)
      << "\n";
  out << "hbm_read_bytes    " << Fixed(r.hbm_read_bytes, 0) << "\n";
  out << "hbm_write_bytes   " << Fixed(r.hbm_write_bytes, 0) << "\n";
  if (r.mode == RunMode::kAr) {
    out << "prefill_ns        " << Fixed(r.prefill_ns, 1) << "\n";
  }
  if (r.speedup_vs_1_cluster) {
    out << "speedup_vs_1      " << Fixed(*r.speedup_vs_1_cluster, 3) << "\n";
  }
  return out.str();
}

std::string CsvHeader(const std::string& axis, bool images) {
  return axis + (images ? ",images_per_s" : ",tokens_per_s") +
         ",total_ns,fpu_util,hbm_read_bytes,hbm_write_bytes";
}

std::string CsvRow(const std::string& axis_value, const RunReport& r) {
  return axis_value + "," + Number(r.throughput) + "," + Number(r.total_ns) +
         "," + Number(r.fpu_utilization) + "," + Number(r.hbm_read_bytes) +
         "," + Number(r.hbm_write_bytes);
}

}  // namespace fmsim
