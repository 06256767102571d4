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

#include "fmsim/validation.h"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include "fmsim/decoder.h"
#include "fmsim/machine.h"
#include "fmsim/models.h"
#include "fmsim/runner.h"
#include "fmsim/scheduler.h"
#include "fmsim/tensor.h"
#include "json.hpp"

#ifndef FMSIM_DATA_DIR
#define FMSIM_DATA_DIR "."
#endif

namespace fmsim {
namespace {

using nlohmann::json;

int64_t Uniform(std::mt19937_64& rng, int64_t lo, int64_t hi) {
  return std::uniform_int_distribution<int64_t>(lo, hi)(rng);
}

std::string Fmt(const char* pattern, double v) {
  char buf[128];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

bool InWindow(double v, double target, double rel) {
  return v >= target * (1 - rel) && v <= target * (1 + rel);
}

CheckResult Result(std::string name, bool pass, double measured,
                   std::string detail) {
  return {std::move(name), pass, measured, std::move(detail)};
}

// ---- Recipe evaluators at full model scale --------------------------------

constexpr double kMiB = 1024.0 * 1024.0;

CheckResult EvalKernels(const ValidationOptions& opt) {
  const CheckResult parts[] = {CheckFlashAttention(Format::kFP64, opt),
                               CheckFlashAttention(Format::kFP32, opt),
                               CheckGemmTiled(opt), CheckTreeReduce(opt)};
  CheckResult r{"kernel_equivalence", true, 0, ""};
  for (const auto& p : parts) {
    r.pass = r.pass && p.pass;
    r.detail += (r.detail.empty() ? "" : "; ") + p.name + " " +
                Fmt("%.3g", p.measured);
  }
  return r;
}

CheckResult EvalTraffic() {
  const ModelConfig gj = PresetModel("gpt-j");
  const TrafficReport fused = HbmTraffic(gj, RunMode::kNar, 2048, true);
  const TrafficReport unfused = HbmTraffic(gj, RunMode::kNar, 2048, false);
  const double f = fused.block_read_bytes / kMiB;
  const double u = unfused.block_read_bytes / kMiB;
  const double ratio = u / f;
  const bool pass = ratio >= 1.45 && ratio <= 1.75 && InWindow(u, 624, 0.15) &&
                    InWindow(f, 384, 0.15);
  return Result("hbm_traffic", pass, ratio,
                "unfused " + Fmt("%.1f", u) + " MiB, fused " + Fmt("%.1f", f) +
                    " MiB, ratio " + Fmt("%.3f", ratio));
}

CheckResult EvalUtilization() {
  const ModelConfig gj = PresetModel("gpt-j");
  const MachineConfig cfg = DefaultMachineConfig();
  const Format fmts[] = {Format::kFP64, Format::kFP32, Format::kFP16,
                         Format::kFP8E4M3};
  const double targets[] = {0.763, 0.797, 0.706, 0.652};
  double u[4];
  bool pass = true;
  std::string detail;
  double max_ar = 0;
  for (int i = 0; i < 4; ++i) {
    u[i] = RunNar(gj, 1024, fmts[i], cfg).fpu_utilization;
    pass = pass && std::fabs(u[i] - targets[i]) <= 0.10;
    const double ar = RunArGenerate(gj, 1024, 16, fmts[i], cfg).fpu_utilization;
    max_ar = std::max(max_ar, ar);
    detail += std::string(FormatName(fmts[i])) + " " + Fmt("%.3f", u[i]) + " ";
  }
  pass = pass && u[1] > u[0] && u[0] > u[2] && u[2] > u[3] && max_ar < 0.12;
  detail += "ar_max " + Fmt("%.3f", max_ar);
  return Result("fpu_utilization", pass, u[1], detail);
}

CheckResult EvalSpeedups() {
  const ModelConfig gj = PresetModel("gpt-j");
  const MachineConfig cfg = DefaultMachineConfig();
  const double t64 = RunNar(gj, 1024, Format::kFP64, cfg).total_ns;
  const double t32 = RunNar(gj, 1024, Format::kFP32, cfg).total_ns;
  const double t16 = RunNar(gj, 1024, Format::kFP16, cfg).total_ns;
  const double t8 = RunNar(gj, 1024, Format::kFP8E4M3, cfg).total_ns;
  MachineConfig base = cfg;
  base.isa_mode = IsaMode::kBaseline;
  const double tb = RunNar(gj, 1024, Format::kFP64, base).total_ns;
  const double s1 = t64 / t32, s2 = t32 / t16, isa = tb / t64;
  const bool pass = s1 >= 1.5 && s1 <= 2.2 && s2 >= 1.2 && s2 <= 1.8 &&
                    t8 < t16 && isa >= 4.0 && isa <= 5.2;
  return Result("precision_speedup", pass, s1,
                "fp64->fp32 " + Fmt("%.3f", s1) + ", fp32->fp16 " +
                    Fmt("%.3f", s2) + ", fp16->fp8 " + Fmt("%.3f", t16 / t8) +
                    ", isa " + Fmt("%.3f", isa));
}

CheckResult EvalScaling() {
  const MachineConfig cfg = DefaultMachineConfig();
  const ModelConfig vh = PresetModel("vit-h");
  const ModelConfig vb = PresetModel("vit-b");
  const Format f = Format::kFP8E4M3;
  const double h1 = RunVit(vh, f, WithClusters(cfg, 1)).total_ns;
  const double b1 = RunVit(vb, f, WithClusters(cfg, 1)).total_ns;
  bool pass = true;
  std::string detail = "vit-h";
  const int counts[] = {4, 8, 16};
  const double targets[] = {4.0, 7.9, 15.8};
  for (int i = 0; i < 3; ++i) {
    const double s = h1 / RunVit(vh, f, WithClusters(cfg, counts[i])).total_ns;
    pass = pass && InWindow(s, targets[i], 0.15);
    detail += " " + Fmt("%.2f", s);
  }
  const double sb = b1 / RunVit(vb, f, WithClusters(cfg, 16)).total_ns;
  pass = pass && InWindow(sb, 12.0, 0.15);
  detail += "; vit-b " + Fmt("%.2f", sb);
  return Result("cluster_scaling", pass, sb, detail);
}

CheckResult EvalConstantFlops() {
  const MachineConfig cfg = DefaultMachineConfig();
  const ModelConfig xl = PresetModel("gpt3-xl");
  double lo = std::numeric_limits<double>::infinity(), hi = 0;
  double tok128 = 0, tok2048 = 0;
  for (int64_t s : {128, 256, 512, 1024, 2048}) {
    const RunReport r = RunNar(xl, s, Format::kFP8E4M3, cfg);
    lo = std::min(lo, r.achieved_flops_per_s);
    hi = std::max(hi, r.achieved_flops_per_s);
    if (s == 128) tok128 = r.throughput;
    if (s == 2048) tok2048 = r.throughput;
  }
  const bool pass =
      hi / lo <= 1.10 && InWindow(tok128, 429, 0.25) && InWindow(tok2048, 136, 0.25);
  return Result("constant_tflops", pass, hi / lo,
                "flops max/min " + Fmt("%.3f", hi / lo) + ", tokens/s " +
                    Fmt("%.1f", tok128) + " @128, " + Fmt("%.1f", tok2048) +
                    " @2048");
}

CheckResult EvalBreakdown() {
  const MachineConfig cfg = DefaultMachineConfig();
  const ModelConfig gj = PresetModel("gpt-j");
  const RunReport r32 = RunNar(gj, 1024, Format::kFP32, cfg);
  const RunReport r8 = RunNar(gj, 1024, Format::kFP8E4M3, cfg);
  const double gemm = r32.breakdown[Category::kGemm] / r32.total_ns;
  const double fa32 = r32.breakdown[Category::kFlashAttention] / r32.total_ns;
  const double fa8 = r8.breakdown[Category::kFlashAttention] / r8.total_ns;
  const bool pass = gemm >= 0.55 && gemm <= 0.75 && fa8 > fa32;
  return Result("kernel_breakdown", pass, gemm,
                "fp32 gemm share " + Fmt("%.3f", gemm) +
                    ", flash_attention2 share fp32 " + Fmt("%.4f", fa32) +
                    " fp8 " + Fmt("%.4f", fa8));
}

}  // namespace

double DecodeFp8(uint8_t bits, Format fmt) {
  if (!IsFp8(fmt)) throw std::invalid_argument("DecodeFp8: not an FP8 format");
  const FloatFormat& f = Lookup(fmt);
  const int mant_bits = f.mantissa_bits;
  const int exp_mask = (1 << f.exponent_bits) - 1;
  const int mant = bits & ((1 << mant_bits) - 1);
  const int exp = (bits >> mant_bits) & exp_mask;
  const double sign = (bits & 0x80) ? -1.0 : 1.0;
  if (exp == exp_mask) {
    if (fmt == Format::kFP8E4M3) {
      if (mant == (1 << mant_bits) - 1) {
        return std::numeric_limits<double>::quiet_NaN();
      }
    } else {
      return mant == 0 ? sign * std::numeric_limits<double>::infinity()
                       : std::numeric_limits<double>::quiet_NaN();
    }
  }
  if (exp == 0) return sign * std::ldexp(mant, f.min_exponent() - mant_bits);
  return sign * std::ldexp((1 << mant_bits) + mant, exp - f.bias - mant_bits);
}

uint8_t EncodeFp8(double value, Format fmt) {
  for (int b = 0; b < 256; ++b) {
    const double v = DecodeFp8(static_cast<uint8_t>(b), fmt);
    if (std::isnan(value) ? std::isnan(v)
                          : v == value && std::signbit(v) == std::signbit(value)) {
      return static_cast<uint8_t>(b);
    }
  }
  throw std::invalid_argument("EncodeFp8: value not representable");
}

CheckResult CheckFlashAttention(Format fmt, const ValidationOptions& opt) {
  std::mt19937_64 rng(opt.seed * 7919 + static_cast<uint64_t>(fmt));
  double worst = 0;
  for (int c = 0; c < opt.attention_cases; ++c) {
    const bool causal = c % 2 == 1;
    const int64_t s1 = Uniform(rng, 1, 64);
    const int64_t s2 = causal ? Uniform(rng, s1, 64) : Uniform(rng, 1, 64);
    const int64_t p = Uniform(rng, 1, 32);
    AttentionInputs inp;
    inp.Q = SeededRandom(s1, p, fmt, rng());
    inp.K = SeededRandom(s2, p, fmt, rng());
    inp.V = SeededRandom(s2, p, fmt, rng());
    inp.causal = causal;
    const size_t br = Uniform(rng, 1, s1), bc = Uniform(rng, 1, s2);
    const Matrix ref = AttentionNaive(inp, fmt);
    const Matrix got = FlashAttention2(inp, br, bc, fmt);
    double err = MaxAbsDiff(ref, got);
    if (fmt != Format::kFP64) err /= std::max(MaxAbs(ref), 1e-300);
    worst = std::max(worst, err);
  }
  const double bound = fmt == Format::kFP64 ? 1e-12 : 1e-5;
  return Result("flash_attention2_" + std::string(FormatName(fmt)),
                worst <= bound, worst,
                std::string(fmt == Format::kFP64 ? "max abs" : "max rel") +
                    " error " + Fmt("%.3g", worst) + " <= " + Fmt("%.0e", bound));
}

CheckResult CheckGemmTiled(const ValidationOptions& opt) {
  std::mt19937_64 rng(opt.seed * 104729);
  const MachineConfig cfg = DefaultMachineConfig();
  double worst = 0;
  for (int c = 0; c < opt.gemm_plans; ++c) {
    TilingPlan plan;
    plan.M = Uniform(rng, 1, 32);
    plan.N = Uniform(rng, 1, 32);
    plan.K = Uniform(rng, 1, 32);
    plan.spatial_dim = static_cast<SpatialDim>(Uniform(rng, 0, 2));
    const int64_t split = plan.spatial_dim == SpatialDim::kM   ? plan.M
                          : plan.spatial_dim == SpatialDim::kK ? plan.K
                                                               : 1;
    plan.spatial_parts = static_cast<int>(Uniform(rng, 1, std::min<int64_t>(split, 16)));
    const int64_t rows = plan.spatial_dim == SpatialDim::kM ? plan.PartExtent() : plan.M;
    const int64_t depth = plan.spatial_dim == SpatialDim::kK ? plan.PartExtent() : plan.K;
    plan.tile = {Uniform(rng, 1, rows), Uniform(rng, 1, plan.N),
                 Uniform(rng, 1, depth)};
    ValidatePlan(plan, cfg);
    const Matrix a = SeededRandom(plan.M, plan.K, Format::kFP64, rng());
    const Matrix b = SeededRandom(plan.K, plan.N, Format::kFP64, rng());
    worst = std::max(worst, MaxAbsDiff(GemmNaive(a, b), GemmTiled(a, b, 1.0, plan)));
  }
  return Result("gemm_tiled", worst <= 1e-12, worst,
                "max abs error " + Fmt("%.3g", worst) + " <= 1e-12");
}

CheckResult CheckTreeReduce(const ValidationOptions& opt) {
  double worst = 0;
  bool identical = true;
  for (int n : {2, 4, 8, 16}) {
    std::vector<Matrix> parts;
    for (int i = 0; i < n; ++i) {
      parts.push_back(SeededRandom(16, 16, Format::kFP64, opt.seed * 31 + n * 97 + i));
    }
    const ReductionSchedule s = BuildReductionSchedule(n, 4);
    const Matrix first = TreeReduce(parts, s);
    worst = std::max(worst, MaxAbsDiff(first, SequentialSum(parts)));
    const int saved = omp_get_max_threads();
    for (int threads : {1, 2, saved}) {
      omp_set_num_threads(threads);
      identical = identical && TreeReduce(parts, s) == first;
    }
    omp_set_num_threads(saved);
  }
  return Result("tree_reduce", worst <= 1e-13 && identical, worst,
                "max abs error " + Fmt("%.3g", worst) +
                    (identical ? ", bit-identical across runs and threads"
                               : ", NOT bit-identical"));
}

CheckResult CheckArNar(const ValidationOptions& opt) {
  ToyDecoderConfig cfg;  // 2 blocks, E=16, H=2, P=8, FF=32
  const ToyDecoder model = MakeToyDecoder(cfg, opt.seed);
  std::mt19937_64 rng(opt.seed);
  std::vector<int> prompt(5);
  for (int& t : prompt) t = static_cast<int>(Uniform(rng, 0, cfg.vocab - 1));
  const ArResult ar = GenerateAr(model, prompt, 12);
  const std::vector<int> seen(ar.tokens.begin(),
                              ar.tokens.begin() + ar.logits.rows());
  const Matrix nar = ForwardNar(model, seen);
  const double err = MaxAbsDiff(nar, ar.logits);
  return Result("ar_nar_equivalence", err <= 1e-12, err,
                "max abs logit difference " + Fmt("%.3g", err) + " over " +
                    std::to_string(ar.logits.rows()) + " positions");
}

CheckResult CheckFp8Fidelity(const ValidationOptions& opt) {
  int64_t failures = 0;
  std::string detail;
  for (Format fmt : {Format::kFP8E4M3, Format::kFP8E5M2}) {
    double max_finite = 0;
    for (int b = 0; b < 256; ++b) {
      const double v = DecodeFp8(static_cast<uint8_t>(b), fmt);
      if (std::isnan(v)) continue;
      if (std::isfinite(v)) max_finite = std::max(max_finite, v);
      if (Quantize(v, fmt) != v) ++failures;
    }
    const double want = fmt == Format::kFP8E4M3 ? 448.0 : 57344.0;
    if (max_finite != want || Lookup(fmt).max_finite != want) ++failures;
    detail += std::string(FormatName(fmt)) + " max " + Fmt("%.0f", max_finite) + "; ";
  }
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> mag(-20.0, 18.0);
  std::bernoulli_distribution neg(0.5);
  auto sample = [&] {
    const double x = std::exp2(mag(rng));
    return neg(rng) ? -x : x;
  };
  int64_t violations = 0;
  for (int64_t i = 0; i < opt.monotonic_pairs; ++i) {
    double x = sample(), y = sample();
    if (x > y) std::swap(x, y);
    for (Format fmt : {Format::kFP8E4M3, Format::kFP8E5M2}) {
      if (Quantize(x, fmt) > Quantize(y, fmt)) ++violations;
    }
  }
  failures += violations;
  detail += "monotonicity violations " + std::to_string(violations) + " in " +
            std::to_string(opt.monotonic_pairs) + " pairs";
  return Result("fp8_fidelity", failures == 0, static_cast<double>(failures),
                detail);
}

CheckResult CheckIGeluBound(const ValidationOptions& opt) {
  double worst = 0;
  const int64_t n = opt.gelu_points;
  for (int64_t i = 0; i < n; ++i) {
    const double x = -8.0 + 16.0 * static_cast<double>(i) / (n - 1);
    worst = std::max(worst, std::fabs(IGelu(x, opt.gelu) - ExactGelu(x)));
  }
  return Result("igelu_bound", worst < 0.05, worst,
                "max |i_gelu - gelu| on [-8, 8] = " + Fmt("%.6f", worst) +
                    " < 0.05");
}

std::vector<CheckResult> RunValidation(const ValidationOptions& opt) {
  return {CheckFlashAttention(Format::kFP64, opt),
          CheckFlashAttention(Format::kFP32, opt),
          CheckGemmTiled(opt),
          CheckTreeReduce(opt),
          CheckArNar(opt),
          CheckFp8Fidelity(opt),
          CheckIGeluBound(opt)};
}

std::string DefaultRecipePath() {
  return std::string(FMSIM_DATA_DIR) + "/recipes/recipes.json";
}

std::vector<Recipe> LoadRecipes(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open recipes " + path);
  std::vector<Recipe> out;
  try {
    const json j = json::parse(in);
    for (const json& r : j.at("recipes")) {
      out.push_back({r.at("criterion").get<int>(), r.at("id").get<std::string>(),
                     r.at("command").get<std::string>(),
                     r.at("assertion").get<std::string>(),
                     r.at("basis").get<std::string>(),
                     r.at("check").get<std::string>()});
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument("recipes " + path + ": " + e.what());
  }
  return out;
}

CheckResult RunRecipe(const Recipe& recipe, const ValidationOptions& opt) {
  CheckResult r;
  const std::string& c = recipe.check;
  if (c == "kernel_equivalence") {
    r = EvalKernels(opt);
  } else if (c == "ar_nar_equivalence") {
    r = CheckArNar(opt);
  } else if (c == "fp8_fidelity") {
    r = CheckFp8Fidelity(opt);
  } else if (c == "igelu_bound") {
    r = CheckIGeluBound(opt);
  } else if (c == "hbm_traffic") {
    r = EvalTraffic();
  } else if (c == "fpu_utilization") {
    r = EvalUtilization();
  } else if (c == "precision_speedup") {
    r = EvalSpeedups();
  } else if (c == "cluster_scaling") {
    r = EvalScaling();
  } else if (c == "constant_tflops") {
    r = EvalConstantFlops();
  } else if (c == "kernel_breakdown") {
    r = EvalBreakdown();
  } else {
    throw std::invalid_argument("recipe " + recipe.id + ": unknown check '" +
                                c + "'");
  }
  r.name = recipe.id;
  return r;
}

std::string FormatCheck(const CheckResult& r) {
  return std::string(r.pass ? "PASS" : "FAIL") + "  " + r.name + "  " +
         r.detail;
}

}  // namespace fmsim
