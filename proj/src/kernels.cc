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

#include "fmsim/kernels.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace fmsim {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void Require(bool cond, const char* what) {
  if (!cond) throw std::invalid_argument(what);
}

// acc[i][j] continues its chain over k in [k0, k0 + klen) for the rows and
// columns given. `acc` is an M x N row-major buffer.
void AccumulateTile(const double* a, const double* b, double* acc,
                    int64_t K, int64_t N, int64_t r0, int64_t rlen,
                    int64_t c0, int64_t clen, int64_t k0, int64_t klen,
                    Format acc_fmt) {
  for (int64_t i = r0; i < r0 + rlen; ++i) {
    for (int64_t j = c0; j < c0 + clen; ++j) {
      double& cell = acc[i * N + j];
      cell = WideningDotStrided(a + i * K + k0, b + k0 * N + j,
                                static_cast<size_t>(klen),
                                static_cast<size_t>(N), acc_fmt, cell);
    }
  }
}

// Temporal tiling of one spatial part: rows [r0, r0 + rlen), k range
// [k0, k0 + klen), all of N.
void RunPart(const double* a, const double* b, double* acc, int64_t K,
             int64_t N, int64_t r0, int64_t rlen, int64_t k0, int64_t klen,
             const TileShape& tile, Format acc_fmt) {
  for (const auto& [mo, ml] : TileRanges(rlen, tile.m)) {
    for (const auto& [no, nl] : TileRanges(N, tile.n)) {
      for (const auto& [ko, kl] : TileRanges(klen, tile.k)) {
        AccumulateTile(a, b, acc, K, N, r0 + mo, ml, no, nl, k0 + ko, kl,
                       acc_fmt);
      }
    }
  }
}

size_t NextPow2(size_t n) { return std::bit_ceil(std::max<size_t>(n, 1)); }

double Exp(double x, Format stats) { return Quantize(std::exp(x), stats); }

// Quantized score of query row i against key row j.
double Score(const AttentionInputs& inp, size_t i, size_t j, double scale,
             Format acc, Format stats) {
  const size_t p = inp.Q.cols();
  const double dot = WideningDotStrided(inp.Q.Row(i).data(),
                                        inp.K.Row(j).data(), p, 1, acc);
  return Quantize(Quantize(dot, stats) * scale, stats);
}

AttentionInputs ConvertInputs(const AttentionInputs& inp, Format fmt) {
  AttentionInputs out;
  out.Q = Convert(inp.Q, fmt);
  out.K = Convert(inp.K, fmt);
  out.V = Convert(inp.V, fmt);
  out.causal = inp.causal;
  out.scale = inp.scale;
  return out;
}

void CheckMhaShapes(const Matrix& X, const MhaWeights& w,
                    const MhaConfig& cfg) {
  Require(cfg.heads >= 1 && cfg.head_dim >= 1, "MHA: bad head config");
  const size_t hp = static_cast<size_t>(cfg.heads) * cfg.head_dim;
  const size_t e = X.cols();
  for (const Matrix* m : {&w.wq, &w.wk, &w.wv}) {
    Require(m->rows() == e && m->cols() == hp,
            "MHA: projection weights must be E x (H*P)");
  }
  Require(w.wl.rows() == hp && w.wl.cols() == e,
          "MHA: W_L must be (H*P) x E");
  Require(w.bl.empty() || w.bl.size() == e, "MHA: bias length must be E");
}

}  // namespace

// ---- GEMM -----------------------------------------------------------------

Matrix GemmNaive(const Matrix& A, const Matrix& B, double alpha,
                 std::optional<Format> acc_fmt,
                 std::optional<Format> out_fmt) {
  Require(A.cols() == B.rows(), "GEMM: inner dimensions differ");
  Require(A.format() == B.format(), "GEMM: operand formats differ");
  const Format acc = acc_fmt.value_or(DefaultAccumulator(A.format()));
  Require(IsSupportedWidening(A.format(), acc),
          "GEMM: unsupported accumulator format");
  const size_t M = A.rows(), N = B.cols(), K = A.cols();
  Matrix C(M, N, out_fmt.value_or(A.format()));
  const double* a = A.values().data();
  const double* b = B.values().data();
  for (size_t i = 0; i < M; ++i) {
    for (size_t j = 0; j < N; ++j) {
      C.Set(i, j, alpha * WideningDotStrided(a + i * K, b + j, K, N, acc));
    }
  }
  return C;
}

Matrix GemmTiled(const Matrix& A, const Matrix& B, double alpha,
                 const TilingPlan& plan, std::optional<Format> out_fmt) {
  Require(A.cols() == B.rows(), "GEMM: inner dimensions differ");
  Require(A.format() == B.format(), "GEMM: operand formats differ");
  Require(static_cast<int64_t>(A.rows()) == plan.M &&
              static_cast<int64_t>(B.cols()) == plan.N &&
              static_cast<int64_t>(A.cols()) == plan.K,
          "GEMM: plan shape does not match operands");
  Require(plan.in_fmt == A.format(), "GEMM: plan input format mismatch");
  Require(IsSupportedWidening(plan.in_fmt, plan.acc_fmt),
          "GEMM: unsupported accumulator format");
  Require(plan.tile.m >= 1 && plan.tile.n >= 1 && plan.tile.k >= 1,
          "GEMM: tile extents must be positive");
  Require(plan.spatial_parts >= 1, "GEMM: spatial parts must be positive");

  const int64_t M = plan.M, N = plan.N, K = plan.K;
  const double* a = A.values().data();
  const double* b = B.values().data();
  const Format out = out_fmt.value_or(A.format());
  Matrix C(M, N, out);

  if (plan.spatial_dim == SpatialDim::kK) {
    Require(plan.spatial_parts <= K, "GEMM: more K parts than K");
    const Ranges parts = SplitEven(K, plan.spatial_parts);
    const size_t padded = NextPow2(parts.size());
    std::vector<std::vector<double>> bufs(
        parts.size(), std::vector<double>(M * N, 0.0));
#pragma omp parallel for schedule(static)
    for (size_t p = 0; p < parts.size(); ++p) {
      RunPart(a, b, bufs[p].data(), K, N, 0, M, parts[p].first,
              parts[p].second, plan.tile, plan.acc_fmt);
    }
    std::vector<Matrix> partials;
    partials.reserve(padded);
    for (const auto& buf : bufs) {
      partials.push_back(Materialize(M, N, plan.acc_fmt, buf));
    }
    while (partials.size() < padded) partials.emplace_back(M, N, plan.acc_fmt);
    const Matrix sum = TreeReduce(
        partials, BuildReductionSchedule(static_cast<int>(padded),
                                         static_cast<int>(padded)));
    for (int64_t i = 0; i < M; ++i) {
      for (int64_t j = 0; j < N; ++j) C.Set(i, j, alpha * sum.at(i, j));
    }
    return C;
  }

  const int parts_n =
      plan.spatial_dim == SpatialDim::kM ? plan.spatial_parts : 1;
  Require(parts_n <= M, "GEMM: more M parts than M");
  const Ranges parts = SplitEven(M, parts_n);
  std::vector<double> acc(M * N, 0.0);
#pragma omp parallel for schedule(static)
  for (size_t p = 0; p < parts.size(); ++p) {
    RunPart(a, b, acc.data(), K, N, parts[p].first, parts[p].second, 0, K,
            plan.tile, plan.acc_fmt);
  }
  for (int64_t i = 0; i < M; ++i) {
    for (int64_t j = 0; j < N; ++j) C.Set(i, j, alpha * acc[i * N + j]);
  }
  return C;
}

// ---- Attention --------------------------------------------------------------

double AttentionInputs::Scale() const {
  return scale.value_or(1.0 / std::sqrt(static_cast<double>(Q.cols())));
}

void AttentionInputs::Validate() const {
  Require(Q.cols() == K.cols() && K.cols() == V.cols(),
          "attention: Q, K, V must share the head dimension");
  Require(K.rows() == V.rows(), "attention: K and V row counts differ");
  Require(Q.rows() >= 1 && K.rows() >= 1 && Q.cols() >= 1,
          "attention: empty input");
  Require(!causal || Q.rows() <= K.rows(),
          "attention: causal masking needs S1 <= S2");
}

OnlineSoftmaxState::OnlineSoftmaxState(size_t rows, size_t cols,
                                       Format stats_fmt)
    : m(rows, kNegInf), l(rows, 0.0), o_acc(rows, cols, stats_fmt) {}

Matrix AttentionNaive(const AttentionInputs& raw, Format compute_fmt) {
  raw.Validate();
  const AttentionInputs inp = ConvertInputs(raw, compute_fmt);
  const Format acc = DefaultAccumulator(compute_fmt);
  const Format stats = StatsFormat(compute_fmt);
  const double scale = inp.Scale();
  const size_t s1 = inp.Q.rows(), s2 = inp.K.rows(), p = inp.Q.cols();
  Matrix O(s1, p, compute_fmt);
  std::vector<double> score(s2), prob(s2);
  for (size_t i = 0; i < s1; ++i) {
    double m = kNegInf;
    for (size_t j = 0; j < s2; ++j) {
      score[j] = inp.Allowed(i, j) ? Score(inp, i, j, scale, acc, stats)
                                   : kNegInf;
      m = std::max(m, score[j]);
    }
    double l = 0.0;
    for (size_t j = 0; j < s2; ++j) {
      prob[j] = score[j] == kNegInf
                    ? 0.0
                    : Exp(Quantize(score[j] - m, stats), stats);
      l = QuantizedAdd(l, prob[j], stats);
    }
    for (size_t j = 0; j < s2; ++j) {
      prob[j] = Quantize(Quantize(prob[j] / l, stats), compute_fmt);
    }
    for (size_t c = 0; c < p; ++c) {
      const double o = WideningDotStrided(prob.data(), inp.V.values().data() + c,
                                          s2, p, acc);
      O.Set(i, c, o);
    }
  }
  return O;
}

Matrix FlashAttention2(const AttentionInputs& raw, size_t block_rows,
                       size_t block_cols, Format compute_fmt) {
  raw.Validate();
  const size_t s1 = raw.Q.rows(), s2 = raw.K.rows(), p = raw.Q.cols();
  Require(block_rows >= 1 && block_rows <= s1,
          "FlashAttention2: block_rows must be in [1, S1]");
  Require(block_cols >= 1 && block_cols <= s2,
          "FlashAttention2: block_cols must be in [1, S2]");
  const AttentionInputs inp = ConvertInputs(raw, compute_fmt);
  const Format acc = DefaultAccumulator(compute_fmt);
  const Format stats = StatsFormat(compute_fmt);
  const double scale = inp.Scale();
  const Ranges row_blocks = TileRanges(s1, block_rows);
  const Ranges col_blocks = TileRanges(s2, block_cols);
  Matrix O(s1, p, compute_fmt);
  const double* v = inp.V.values().data();

#pragma omp parallel for schedule(dynamic)
  for (size_t rb = 0; rb < row_blocks.size(); ++rb) {
    const auto [r0, br] = row_blocks[rb];
    OnlineSoftmaxState st(br, p, stats);
    std::vector<double> s(block_cols), pc(block_cols);
    for (const auto& [c0, bc] : col_blocks) {
      for (int64_t r = 0; r < br; ++r) {
        const size_t i = r0 + r;
        double row_max = kNegInf;
        for (int64_t c = 0; c < bc; ++c) {
          const size_t j = c0 + c;
          s[c] = inp.Allowed(i, j) ? Score(inp, i, j, scale, acc, stats)
                                   : kNegInf;
          row_max = std::max(row_max, s[c]);
        }
        if (row_max == kNegInf) continue;  // block fully masked for row
        const double m_new = std::max(st.m[r], row_max);
        const double rescale =
            st.m[r] == kNegInf
                ? 0.0
                : Exp(Quantize(st.m[r] - m_new, stats), stats);
        double row_sum = 0.0;
        for (int64_t c = 0; c < bc; ++c) {
          const double e =
              s[c] == kNegInf ? 0.0 : Exp(Quantize(s[c] - m_new, stats), stats);
          row_sum = QuantizedAdd(row_sum, e, stats);
          pc[c] = Quantize(e, compute_fmt);
        }
        st.l[r] = QuantizedAdd(Quantize(st.l[r] * rescale, stats), row_sum,
                               stats);
        st.m[r] = m_new;
        for (size_t col = 0; col < p; ++col) {
          const double pv = WideningDotStrided(pc.data(), v + c0 * p + col,
                                               bc, p, acc);
          st.o_acc.Set(r, col,
                       QuantizedAdd(Quantize(st.o_acc.at(r, col) * rescale,
                                             stats),
                                    Quantize(pv, stats), stats));
        }
      }
    }
    for (int64_t r = 0; r < br; ++r) {
      for (size_t col = 0; col < p; ++col) {
        O.Set(r0 + r, col,
              Quantize(st.o_acc.at(r, col) / st.l[r], stats));
      }
    }
  }
  return O;
}

// ---- Elementwise ------------------------------------------------------------

Matrix LayerNorm(const Matrix& X, std::span<const double> gamma,
                 std::span<const double> beta, double eps) {
  Require(gamma.size() == X.cols() && beta.size() == X.cols(),
          "LayerNorm: gamma and beta must have X.cols entries");
  Require(eps > 0, "LayerNorm: eps must be positive");
  const Format stats = StatsFormat(X.format());
  const size_t n = X.cols();
  Matrix Y(X.rows(), n, X.format());
#pragma omp parallel for schedule(static)
  for (size_t i = 0; i < X.rows(); ++i) {
    const auto row = X.Row(i);
    double sum = 0.0;
    for (double x : row) sum = QuantizedAdd(sum, x, stats);
    const double mean = Quantize(sum / n, stats);
    double sq = 0.0;
    for (double x : row) {
      const double d = Quantize(x - mean, stats);
      sq = QuantizedAdd(sq, Quantize(d * d, stats), stats);
    }
    const double var = Quantize(sq / n, stats);
    const double inv =
        Quantize(1.0 / std::sqrt(QuantizedAdd(var, eps, stats)), stats);
    for (size_t c = 0; c < n; ++c) {
      const double norm = Quantize(Quantize(row[c] - mean, stats) * inv, stats);
      Y.Set(i, c, QuantizedAdd(Quantize(norm * gamma[c], stats), beta[c],
                               stats));
    }
  }
  return Y;
}

double IGelu(double x, const IGeluCoefficients& c) {
  const double t = x / std::sqrt(2.0);
  const double clipped = std::min(std::fabs(t), -c.b) + c.b;
  const double l = std::copysign(c.a * clipped * clipped + 1.0, t);
  return x * 0.5 * (1.0 + l);
}

double ExactGelu(double x) {
  return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0)));
}

// ---- Reduction --------------------------------------------------------------

Matrix TreeReduce(std::span<const Matrix> partials,
                  const ReductionSchedule& schedule) {
  Require(!partials.empty(), "TreeReduce: no partials");
  Require(schedule.participants == static_cast<int>(partials.size()),
          "TreeReduce: schedule does not cover the partials");
  ValidateSchedule(schedule);
  for (const Matrix& m : partials) {
    Require(m.rows() == partials[0].rows() && m.cols() == partials[0].cols() &&
                m.format() == partials[0].format(),
            "TreeReduce: partials differ in shape or format");
  }
  std::vector<Matrix> work(partials.begin(), partials.end());
  size_t begin = 0;
  while (begin < schedule.steps.size()) {
    const int level = schedule.steps[begin].level;
    size_t end = begin;
    while (end < schedule.steps.size() &&
           schedule.steps[end].level == level) {
      ++end;
    }
#pragma omp parallel for schedule(static)
    for (size_t s = begin; s < end; ++s) {
      const ReductionStep& step = schedule.steps[s];
      work[step.receiver].AccumulateFrom(work[step.sender]);
    }
    begin = end;
  }
  return std::move(work[0]);
}

Matrix SequentialSum(std::span<const Matrix> partials) {
  Require(!partials.empty(), "SequentialSum: no partials");
  Matrix out = partials[0];
  for (size_t i = 1; i < partials.size(); ++i) out.AccumulateFrom(partials[i]);
  return out;
}

// ---- Blocks -----------------------------------------------------------------

HeadProjections ProjectHeads(const Matrix& X, const MhaWeights& w,
                             const MhaConfig& cfg) {
  CheckMhaShapes(X, w, cfg);
  const size_t e = X.cols();
  const size_t p = cfg.head_dim;
  HeadProjections out;
  out.q.resize(cfg.heads);
  out.k.resize(cfg.heads);
  out.v.resize(cfg.heads);
#pragma omp parallel for schedule(static)
  for (int h = 0; h < cfg.heads; ++h) {
    const TileSpec cols{0, h * p, e, p};
    out.q[h] = GemmNaive(X, Tile(w.wq, cols));
    out.k[h] = GemmNaive(X, Tile(w.wk, cols));
    out.v[h] = GemmNaive(X, Tile(w.wv, cols));
  }
  return out;
}

Matrix MhaAttend(std::span<const Matrix> q, std::span<const Matrix> k,
                 std::span<const Matrix> v, const MhaWeights& w,
                 const MhaConfig& cfg) {
  const size_t heads = cfg.heads;
  Require(q.size() == heads && k.size() == heads && v.size() == heads,
          "MHA: one Q, K, V per head required");
  const Format fmt = w.wl.format();
  const Format acc = DefaultAccumulator(fmt);
  const size_t s = q[0].rows();
  const size_t e = w.wl.cols();
  const size_t p = cfg.head_dim;
  const size_t padded = NextPow2(heads);
  std::vector<Matrix> partials(padded, Matrix(s, e, acc));
#pragma omp parallel for schedule(static)
  for (size_t h = 0; h < heads; ++h) {
    AttentionInputs inp{q[h], k[h], v[h], cfg.causal, std::nullopt};
    const Matrix o = FlashAttention2(inp, std::min(cfg.block_rows, s),
                                     std::min(cfg.block_cols, k[h].rows()),
                                     fmt);
    const Matrix wl_h = Tile(w.wl, {h * p, 0, p, e});
    partials[h] = GemmNaive(o, wl_h, 1.0, acc, acc);
  }
  const Matrix sum = TreeReduce(
      partials, BuildReductionSchedule(static_cast<int>(padded),
                                       static_cast<int>(padded)));
  Matrix out(s, e, fmt);
  for (size_t i = 0; i < s; ++i) {
    for (size_t c = 0; c < e; ++c) {
      const double bias = w.bl.empty() ? 0.0 : w.bl[c];
      out.Set(i, c, QuantizedAdd(sum.at(i, c), bias, acc));
    }
  }
  return out;
}

Matrix MhaBlock(const Matrix& X, const MhaWeights& w, const MhaConfig& cfg) {
  const HeadProjections proj = ProjectHeads(X, w, cfg);
  return MhaAttend(proj.q, proj.k, proj.v, w, cfg);
}

Matrix MhaUnfused(const Matrix& X, const MhaWeights& w,
                  const MhaConfig& cfg) {
  const HeadProjections proj = ProjectHeads(X, w, cfg);
  const Format fmt = w.wl.format();
  const Format acc = DefaultAccumulator(fmt);
  std::vector<Matrix> heads;
  for (int h = 0; h < cfg.heads; ++h) {
    AttentionInputs inp{proj.q[h], proj.k[h], proj.v[h], cfg.causal,
                        std::nullopt};
    heads.push_back(AttentionNaive(inp, fmt));
  }
  const Matrix l = GemmNaive(ConcatCols(heads), w.wl, 1.0, acc, acc);
  Matrix out(l.rows(), l.cols(), fmt);
  for (size_t i = 0; i < l.rows(); ++i) {
    for (size_t c = 0; c < l.cols(); ++c) {
      const double bias = w.bl.empty() ? 0.0 : w.bl[c];
      out.Set(i, c, QuantizedAdd(l.at(i, c), bias, acc));
    }
  }
  return out;
}

Matrix MlpBlock(const Matrix& X, const MlpWeights& w,
                const IGeluCoefficients& gelu) {
  const size_t e = X.cols(), ff = w.w1.cols();
  Require(w.w1.rows() == e, "MLP: W1 must be E x FF");
  Require(w.w2.rows() == ff && w.w2.cols() == e, "MLP: W2 must be FF x E");
  Require(w.b1.empty() || w.b1.size() == ff, "MLP: b1 must have FF entries");
  Require(w.b2.empty() || w.b2.size() == e, "MLP: b2 must have E entries");
  const Format fmt = X.format();
  const Format acc = DefaultAccumulator(fmt);
  const Format stats = StatsFormat(fmt);

  const Matrix h = GemmNaive(X, w.w1, 1.0, acc, acc);
  Matrix act(h.rows(), ff, fmt);
#pragma omp parallel for schedule(static)
  for (size_t i = 0; i < h.rows(); ++i) {
    for (size_t c = 0; c < ff; ++c) {
      const double b = w.b1.empty() ? 0.0 : w.b1[c];
      const double pre = Quantize(QuantizedAdd(h.at(i, c), b, acc), stats);
      act.Set(i, c, Quantize(IGelu(pre, gelu), stats));
    }
  }
  const Matrix y = GemmNaive(act, w.w2, 1.0, acc, acc);
  Matrix out(y.rows(), e, fmt);
  for (size_t i = 0; i < y.rows(); ++i) {
    for (size_t c = 0; c < e; ++c) {
      const double b = w.b2.empty() ? 0.0 : w.b2[c];
      out.Set(i, c, QuantizedAdd(y.at(i, c), b, acc));
    }
  }
  return out;
}

}  // namespace fmsim
