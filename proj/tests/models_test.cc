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

#include <cmath>
#include <string>

#include "fmsim/machine.h"
#include "fmsim/models.h"
#include "fmsim/runner.h"
#include "fmsim/timing.h"
#include "oracles.h"

namespace fmsim {
namespace {

constexpr double kMiB = 1024.0 * 1024.0;

ModelConfig Toy() {
  ModelConfig m;
  m.name = "toy";
  m.blocks = 1;
  m.E = 8;
  m.H = 2;
  m.P = 4;
  m.FF = 16;
  m.seq_min = 1;
  m.seq_max = 16;
  m.seq_default = 4;
  return m;
}

double Item(const TrafficReport& t, const std::string& name, bool read) {
  for (const auto& it : t.per_block) {
    if (it.tensor == name) return read ? it.read_bytes : it.write_bytes;
  }
  for (const auto& it : t.model_level) {
    if (it.tensor == name) return read ? it.read_bytes : it.write_bytes;
  }
  return -1;
}

TEST(Presets, TableDimensions) {
  const ModelConfig b = PresetModel("vit-b");
  EXPECT_EQ(b.blocks, 12);
  EXPECT_EQ(b.E, 768);
  EXPECT_EQ(b.H, 12);
  EXPECT_EQ(b.P, 64);
  EXPECT_EQ(b.FF, 3072);
  EXPECT_EQ(b.seq_default, 197);
  EXPECT_TRUE(b.is_vit());
  const ModelConfig j = PresetModel("gpt-j");
  EXPECT_EQ(j.blocks, 28);
  EXPECT_EQ(j.E, 4096);
  EXPECT_EQ(j.H, 16);
  EXPECT_EQ(j.P, 256);
  EXPECT_EQ(j.seq_min, 128);
  EXPECT_EQ(j.seq_max, 2048);
  EXPECT_FALSE(j.is_vit());
  for (const ModelConfig& m : ModelPresets()) EXPECT_NO_THROW(m.Validate());
  EXPECT_THROW(PresetModel("bert"), std::invalid_argument);
}

TEST(ModelConfigJson, RoundTripAndErrors) {
  const ModelConfig m = PresetModel("gpt3-xl");
  const ModelConfig back = ModelConfigFromJson(ModelConfigToJson(m));
  EXPECT_EQ(ModelConfigToJson(back), ModelConfigToJson(m));
  nlohmann::json bad = ModelConfigToJson(m);
  bad["E"] = -4;
  try {
    ModelConfigFromJson(bad).Validate();
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("E"), std::string::npos);
  }
  EXPECT_EQ(ParseRunMode("ar"), RunMode::kAr);
  EXPECT_THROW(ParseRunMode("beam"), std::invalid_argument);
}

TEST(Flops, Examples) {
  const ModelConfig b = PresetModel("vit-b");
  // 3 projections x 2 FLOP x S x E x HP.
  EXPECT_DOUBLE_EQ(CountBlockFlops(b, 197, 197).qkv, 3.0 * 2 * 197 * 768 * 768);
  EXPECT_DOUBLE_EQ(CountBlockFlops(b, 197, 197).qkv, 697171968.0);
  const ModelConfig j = PresetModel("gpt-j");
  EXPECT_DOUBLE_EQ(CountBlockFlops(j, 1, 1).scores, 2.0 * j.H * j.P);
  const BlockFlops s = CountBlockFlops(j, 512, 512), s2 = CountBlockFlops(j, 1024, 1024);
  EXPECT_DOUBLE_EQ(s2.scores, 4 * s.scores);
  EXPECT_DOUBLE_EQ(s2.av, 4 * s.av);
  EXPECT_DOUBLE_EQ(s2.qkv, 2 * s.qkv);
  EXPECT_DOUBLE_EQ(CountFlops(j, RunMode::kAr, 100),
                   j.blocks * CountBlockFlops(j, 1, 100).total());
  EXPECT_GT(CountFlops(b, RunMode::kVit, 197), CountFlops(b, RunMode::kNar, 197));
}

TEST(Traffic, ToyLedger) {
  const ModelConfig m = Toy();
  // Hand ledger at 8 bytes/element.
  const double input = 4 * 8 * 8, wqkv = 3 * 8 * 8 * 8, wout = 8 * 8 * 8;
  const double mlp = 2 * 8 * 16 * 8, ln = 2 * 8 * 8;
  const double fused_reads = input + wqkv + wout + mlp + ln;
  const TrafficReport f = HbmTraffic(m, RunMode::kNar, 4, true, Format::kFP64);
  EXPECT_DOUBLE_EQ(fused_reads, 4480.0);
  EXPECT_DOUBLE_EQ(f.read_bytes, fused_reads);
  EXPECT_DOUBLE_EQ(f.write_bytes, 256.0);
  EXPECT_DOUBLE_EQ(Item(f, "w_qkv", true), wqkv);

  const double qkv = 3 * 4 * 8 * 8, scores = 2 * 4 * 4 * 8, heads = 4 * 8 * 8,
               gelu = 4 * 16 * 8;
  const TrafficReport u = HbmTraffic(m, RunMode::kNar, 4, false, Format::kFP64);
  EXPECT_DOUBLE_EQ(u.read_bytes, fused_reads + qkv + scores + heads + gelu);
  EXPECT_DOUBLE_EQ(u.read_bytes, 6272.0);
  EXPECT_DOUBLE_EQ(u.write_bytes, 256.0 + qkv + scores + heads + gelu);
}

TEST(Traffic, ZeroBlocks) {
  ModelConfig m = Toy();
  m.blocks = 0;
  const TrafficReport t = HbmTraffic(m, RunMode::kNar, 4, true, Format::kFP64);
  EXPECT_DOUBLE_EQ(t.read_bytes, 4 * 8 * 8);
  EXPECT_DOUBLE_EQ(t.write_bytes, 4 * 8 * 8);
}

TEST(Traffic, GptJFusionRatio) {
  const ModelConfig j = PresetModel("gpt-j");
  const TrafficReport f = HbmTraffic(j, RunMode::kNar, 2048, true);
  const TrafficReport u = HbmTraffic(j, RunMode::kNar, 2048, false);
  // One transformer block.
  const double ratio = u.block_read_bytes / f.block_read_bytes;
  EXPECT_GE(ratio, 1.45);
  EXPECT_LE(ratio, 1.75);
  EXPECT_NEAR(f.block_read_bytes / kMiB, 384, 0.15 * 384);
  EXPECT_NEAR(u.block_read_bytes / kMiB, 624, 0.15 * 624);
  EXPECT_DOUBLE_EQ(f.read_bytes, j.blocks * f.block_read_bytes);
  EXPECT_NE(f.assumption.find("fp16"), std::string::npos);
}

TEST(Traffic, ArReadsTheCache) {
  const ModelConfig j = PresetModel("gpt-j");
  const TrafficReport a = HbmTraffic(j, RunMode::kAr, 512, true);
  EXPECT_DOUBLE_EQ(Item(a, "kv_cache", true), 2.0 * 511 * j.HP() * 2);
  EXPECT_DOUBLE_EQ(Item(a, "block_input", true), j.E * 2.0);
}

TEST(Timing, BreakdownSumsToTotal) {
  const MachineConfig cfg = DefaultMachineConfig();
  for (const std::string name : {"gpt-j", "gpt3-xl"}) {
    const RunReport r = RunNar(PresetModel(name), 512, Format::kFP16, cfg);
    EXPECT_NEAR(r.breakdown.total(), r.total_ns, 1e-3 * r.total_ns);
    for (double ns : r.breakdown.ns) EXPECT_GE(ns, 0.0);
  }
}

TEST(Timing, PrecisionOrdering) {
  const MachineConfig cfg = DefaultMachineConfig();
  const ModelConfig j = PresetModel("gpt-j");
  double prev = INFINITY;
  for (Format f : {Format::kFP64, Format::kFP32, Format::kFP16, Format::kFP8E4M3}) {
    const double t = RunNar(j, 1024, f, cfg).total_ns;
    EXPECT_LT(t, prev) << FormatName(f);
    prev = t;
  }
}

TEST(Timing, NarThroughputFallsWithSequence) {
  const MachineConfig cfg = DefaultMachineConfig();
  const ModelConfig m = PresetModel("gpt3-xl");
  double prev = INFINITY;
  for (int64_t s : {128, 256, 512, 1024, 2048}) {
    const RunReport r = RunNar(m, s, Format::kFP8E4M3, cfg);
    EXPECT_LT(r.throughput, prev);
    prev = r.throughput;
  }
}

TEST(Timing, ArStepLatencyGrowsWithCache) {
  const MachineConfig cfg = DefaultMachineConfig();
  const ModelConfig j = PresetModel("gpt-j");
  double prev = 0;
  for (int64_t keys : {1, 16, 128, 1024, 2048}) {
    const double t = TimeBlock(j, 1, keys, true, Format::kFP16, true, cfg).total_ns();
    EXPECT_GT(t, prev);
    prev = t;
  }
}

TEST(Timing, MoreClustersIsFaster) {
  const MachineConfig cfg = DefaultMachineConfig();
  for (const std::string name : {"vit-b", "gpt-j"}) {
    const ModelConfig m = PresetModel(name);
    double prev = INFINITY;
    for (int c : {1, 2, 4, 8, 16}) {
      const MachineConfig mc = WithClusters(cfg, c);
      const double t = m.is_vit() ? RunVit(m, Format::kFP16, mc).total_ns
                                  : RunNar(m, 512, Format::kFP16, mc).total_ns;
      EXPECT_LT(t, prev) << name << " " << c;
      prev = t;
    }
  }
}

TEST(Timing, GemmScalesWithSpatialParts) {
  const MachineConfig cfg = DefaultMachineConfig();
  double prev = INFINITY;
  for (int c : {1, 2, 4, 8, 16}) {
    const double t =
        SpatialGemmTiming(1024, 1024, 1024, Format::kFP16, WithClusters(cfg, c)).total_ns;
    EXPECT_LE(t, prev);
    prev = t;
  }
}

TEST(Timing, FusionNeverSlower) {
  const MachineConfig cfg = DefaultMachineConfig();
  const ModelConfig j = PresetModel("gpt-j");
  for (Format f : {Format::kFP32, Format::kFP8E4M3}) {
    EXPECT_LT(RunNar(j, 1024, f, cfg, true).total_ns,
              RunNar(j, 1024, f, cfg, false).total_ns);
  }
}

TEST(Runner, ArUtilizationIsLow) {
  const MachineConfig cfg = DefaultMachineConfig();
  const ModelConfig j = PresetModel("gpt-j");
  for (Format f : {Format::kFP64, Format::kFP32, Format::kFP16, Format::kFP8E4M3}) {
    const RunReport r = RunArGenerate(j, 1024, 16, f, cfg);
    EXPECT_LT(r.fpu_utilization, 0.12) << FormatName(f);
    EXPECT_GT(r.prefill_ns, 0.0);
    EXPECT_EQ(r.new_tokens, 16);
  }
  EXPECT_THROW(RunArGenerate(j, 2040, 16, Format::kFP16, cfg), std::invalid_argument);
}

TEST(Runner, NarRejectsOutOfRangeSequence) {
  const MachineConfig cfg = DefaultMachineConfig();
  EXPECT_THROW(RunNar(PresetModel("gpt-j"), 4096, Format::kFP16, cfg),
               std::invalid_argument);
  EXPECT_THROW(RunNar(PresetModel("gpt-j"), 64, Format::kFP16, cfg),
               std::invalid_argument);
}

TEST(Runner, VitExamples) {
  const MachineConfig cfg = DefaultMachineConfig();
  const double h16 = RunVit(PresetModel("vit-h"), Format::kFP8E4M3, cfg).total_ns;
  const double h1 =
      RunVit(PresetModel("vit-h"), Format::kFP8E4M3, WithClusters(cfg, 1)).total_ns;
  EXPECT_GE(h1 / h16, 14.0);
  const RunReport b = RunVit(PresetModel("vit-b"), Format::kFP8E4M3, cfg);
  const RunReport l = RunVit(PresetModel("vit-l"), Format::kFP8E4M3, cfg);
  EXPECT_GT(l.total_ns, b.total_ns);
  EXPECT_TRUE(b.images());
  EXPECT_NEAR(b.throughput, 1e9 / b.total_ns, 1e-9 * b.throughput);
}

TEST(Runner, ReportCarriesCalibration) {
  const RunReport r = RunNar(PresetModel("gpt-j"), 1024, Format::kFP32,
                             DefaultMachineConfig());
  const nlohmann::json j = ReportToJson(r);
  EXPECT_TRUE(j["calibration"].contains("isa_mode"));
  EXPECT_TRUE(j["calibration"].contains("traffic_assumption"));
  EXPECT_NEAR(r.fpu_utilization, 0.797, 0.10);
  EXPECT_FALSE(DumpPlan(PresetModel("gpt-j"), 1024, Format::kFP32,
                        DefaultMachineConfig())
                   .empty());
}

}  // namespace
}  // namespace fmsim
