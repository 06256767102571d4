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

#ifndef FMSIM_KERNELS_H_
#define FMSIM_KERNELS_H_

// Numeric kernels of the transformer block. Each optimized kernel has a
// serial naive counterpart that serves as its test oracle.
//
// Precision flow for a compute format f: inner products accumulate in
// DefaultAccumulator(f); softmax, layernorm and GELU statistics run in
// StatsFormat(f); results are rounded back to f.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "fmsim/numerics.h"
#include "fmsim/scheduler.h"
#include "fmsim/tensor.h"

namespace fmsim {

// ---- GEMM -----------------------------------------------------------------

// C = alpha * A x B. Each inner product is a left-to-right chain rounded
// to `acc_fmt` (default: DefaultAccumulator(A.format())); C is rounded to
// `out_fmt` (default: A.format()). A and B must share a format.
Matrix GemmNaive(const Matrix& A, const Matrix& B, double alpha = 1.0,
                 std::optional<Format> acc_fmt = std::nullopt,
                 std::optional<Format> out_fmt = std::nullopt);

// Executes `plan`. M-spatial parts run in parallel and continue each
// inner-product chain across temporal K tiles, so they match GemmNaive
// bit for bit. K-spatial parts produce partial sums in plan.acc_fmt that
// are combined with TreeReduce.
Matrix GemmTiled(const Matrix& A, const Matrix& B, double alpha,
                 const TilingPlan& plan,
                 std::optional<Format> out_fmt = std::nullopt);

// ---- Attention --------------------------------------------------------------

struct AttentionInputs {
  Matrix Q;  // S1 x P
  Matrix K;  // S2 x P
  Matrix V;  // S2 x P
  bool causal = false;
  std::optional<double> scale;  // default 1/sqrt(P)

  double Scale() const;
  // Query i may attend key j iff j <= i + (S2 - S1).
  bool Allowed(size_t i, size_t j) const {
    return !causal || j <= i + (K.rows() - Q.rows());
  }
  // Throws std::invalid_argument on inconsistent shapes.
  void Validate() const;
};

// Row statistics of the streaming softmax, all in the stats format.
struct OnlineSoftmaxState {
  std::vector<double> m;  // running max, -inf before any unmasked column
  std::vector<double> l;  // running denominator
  Matrix o_acc;           // unnormalized output

  OnlineSoftmaxState(size_t rows, size_t cols, Format stats_fmt);
};

// Row-wise stable softmax, normalized probabilities rounded to
// `compute_fmt`, then A x V.
Matrix AttentionNaive(const AttentionInputs& inp, Format compute_fmt);

// Block-at-a-time attention with online softmax and normalization
// deferred to the end. Query blocks run in parallel.
// Throws std::invalid_argument unless 1 <= Br <= S1 and 1 <= Bc <= S2.
Matrix FlashAttention2(const AttentionInputs& inp, size_t block_rows,
                       size_t block_cols, Format compute_fmt);

// ---- Elementwise ------------------------------------------------------------

// Per row (x - mean) / sqrt(var + eps) * gamma + beta with population
// variance. Rows run in parallel.
Matrix LayerNorm(const Matrix& X, std::span<const double> gamma,
                 std::span<const double> beta, double eps = 1e-5);

struct IGeluCoefficients {
  double a = -0.2888;
  double b = -1.769;
};

// x * 0.5 * (1 + L(x / sqrt(2))), L(t) = sign(t) * (a * (min(|t|, -b) + b)^2 + 1).
double IGelu(double x, const IGeluCoefficients& c = {});
// 0.5 * x * (1 + erf(x / sqrt(2))).
double ExactGelu(double x);

// ---- Reduction --------------------------------------------------------------

// Replays `schedule` (receiver += sender, level by level) over copies of
// `partials` and returns participant 0. Steps within a level run in
// parallel; the result does not depend on the thread count.
Matrix TreeReduce(std::span<const Matrix> partials,
                  const ReductionSchedule& schedule);
// Sequential left fold, the reduction oracle.
Matrix SequentialSum(std::span<const Matrix> partials);

// ---- Blocks -----------------------------------------------------------------

struct MhaWeights {
  Matrix wq;  // E x (H*P)
  Matrix wk;  // E x (H*P)
  Matrix wv;  // E x (H*P)
  Matrix wl;  // (H*P) x E
  std::vector<double> bl;  // E entries, or empty for no bias
};

struct MhaConfig {
  int heads = 1;
  int head_dim = 1;
  bool causal = false;
  size_t block_rows = 16;  // clipped to the sequence lengths
  size_t block_cols = 16;
};

struct HeadProjections {
  std::vector<Matrix> q;
  std::vector<Matrix> k;
  std::vector<Matrix> v;
};

// Per-head Q, K, V = X * W[:, hP:(h+1)P], in X.format().
HeadProjections ProjectHeads(const Matrix& X, const MhaWeights& w,
                             const MhaConfig& cfg);

// Runs FlashAttention2 per head and the fused concat + linear: head h
// multiplies its output by rows hP..(h+1)P of W_L and the per-head partials
// are tree-reduced in the accumulator format.
Matrix MhaAttend(std::span<const Matrix> q, std::span<const Matrix> k,
                 std::span<const Matrix> v, const MhaWeights& w,
                 const MhaConfig& cfg);

Matrix MhaBlock(const Matrix& X, const MhaWeights& w, const MhaConfig& cfg);

// Oracle: naive attention per head, explicit concatenation, one GEMM.
Matrix MhaUnfused(const Matrix& X, const MhaWeights& w, const MhaConfig& cfg);

struct MlpWeights {
  Matrix w1;  // E x FF
  std::vector<double> b1;
  Matrix w2;  // FF x E
  std::vector<double> b2;
};

// i_gelu(X W1 + b1) W2 + b2. The first GEMM and bias stay in the
// accumulator format, GELU runs in the stats format, and the result is
// rounded to X.format() before the second GEMM.
Matrix MlpBlock(const Matrix& X, const MlpWeights& w,
                const IGeluCoefficients& gelu = {});

}  // namespace fmsim

#endif  // FMSIM_KERNELS_H_
