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

// Serial reference kernels against their OpenMP-parallel counterparts.

#include <benchmark/benchmark.h>

#include <vector>

#include "fmsim/kernels.h"
#include "fmsim/machine.h"
#include "fmsim/scheduler.h"

namespace fmsim {
namespace {

void BM_GemmNaive(benchmark::State& state) {
  const size_t n = state.range(0);
  const Format f = static_cast<Format>(state.range(1));
  const Matrix A = SeededRandom(n, n, f, 1), B = SeededRandom(n, n, f, 2);
  for (auto _ : state) benchmark::DoNotOptimize(GemmNaive(A, B));
  state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}

void BM_GemmTiled(benchmark::State& state) {
  const size_t n = state.range(0);
  const Format f = static_cast<Format>(state.range(1));
  const Matrix A = SeededRandom(n, n, f, 1), B = SeededRandom(n, n, f, 2);
  const TilingPlan plan = PlanGemmTiling(n, n, n, f, DefaultMachineConfig());
  for (auto _ : state) benchmark::DoNotOptimize(GemmTiled(A, B, 1.0, plan));
  state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}

AttentionInputs Inputs(size_t s, size_t p, Format f) {
  return {SeededRandom(s, p, f, 1), SeededRandom(s, p, f, 2), SeededRandom(s, p, f, 3),
          true, {}};
}

void BM_AttentionNaive(benchmark::State& state) {
  const Format f = static_cast<Format>(state.range(1));
  const AttentionInputs in = Inputs(state.range(0), 64, f);
  for (auto _ : state) benchmark::DoNotOptimize(AttentionNaive(in, f));
}

void BM_FlashAttention2(benchmark::State& state) {
  const Format f = static_cast<Format>(state.range(1));
  const AttentionInputs in = Inputs(state.range(0), 64, f);
  for (auto _ : state) benchmark::DoNotOptimize(FlashAttention2(in, 32, 32, f));
}

std::vector<Matrix> Partials(int n) {
  std::vector<Matrix> parts;
  for (int i = 0; i < n; ++i) parts.push_back(SeededRandom(128, 128, Format::kFP32, i));
  return parts;
}

void BM_SequentialSum(benchmark::State& state) {
  const auto parts = Partials(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(SequentialSum(parts));
}

void BM_TreeReduce(benchmark::State& state) {
  const auto parts = Partials(state.range(0));
  const ReductionSchedule s = BuildReductionSchedule(state.range(0), 4);
  for (auto _ : state) benchmark::DoNotOptimize(TreeReduce(parts, s));
}

constexpr int kFp64 = static_cast<int>(Format::kFP64);
constexpr int kFp16 = static_cast<int>(Format::kFP16);

BENCHMARK(BM_GemmNaive)->ArgsProduct({{64, 256}, {kFp64, kFp16}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GemmTiled)->ArgsProduct({{64, 256}, {kFp64, kFp16}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AttentionNaive)->ArgsProduct({{128, 512}, {kFp64, kFp16}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FlashAttention2)->ArgsProduct({{128, 512}, {kFp64, kFp16}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SequentialSum)->Arg(16)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_TreeReduce)->Arg(16)->Unit(benchmark::kMicrosecond);

}  // namespace
}  // namespace fmsim

BENCHMARK_MAIN();
