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

#include "fmsim/decoder.h"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fmsim {
namespace {

Matrix Uniform(size_t rows, size_t cols, Format fmt, uint64_t seed) {
  const double s = 1.0 / std::sqrt(static_cast<double>(rows));
  return SeededRandom(rows, cols, fmt, seed, -s, s);
}

std::vector<double> Values(size_t n, double lo, double hi, Format fmt,
                           uint64_t seed) {
  const Matrix m = SeededRandom(1, n, fmt, seed, lo, hi);
  return {m.values().begin(), m.values().end()};
}

Matrix BlockTail(const DecoderBlockWeights& w, const Matrix& attn) {
  return MlpBlock(LayerNorm(attn, w.ln_gamma, w.ln_beta), w.mlp);
}

}  // namespace

MhaConfig ToyDecoder::Mha() const {
  MhaConfig m;
  m.heads = cfg.H;
  m.head_dim = cfg.P;
  m.causal = true;
  m.block_rows = 4;
  m.block_cols = 4;
  return m;
}

ToyDecoder MakeToyDecoder(const ToyDecoderConfig& cfg, uint64_t seed) {
  if (cfg.blocks < 0 || cfg.E < 1 || cfg.H < 1 || cfg.P < 1 || cfg.FF < 1 ||
      cfg.vocab < 1 || cfg.max_seq < 1) {
    throw std::invalid_argument("toy decoder: dimensions must be positive");
  }
  const size_t e = cfg.E, hp = cfg.H * cfg.P, ff = cfg.FF;
  const Format f = cfg.fmt;
  ToyDecoder m;
  m.cfg = cfg;
  uint64_t s = seed * 1000;
  m.embedding = SeededRandom(cfg.vocab, e, f, ++s);
  for (int b = 0; b < cfg.blocks; ++b) {
    DecoderBlockWeights w;
    w.mha.wq = Uniform(e, hp, f, ++s);
    w.mha.wk = Uniform(e, hp, f, ++s);
    w.mha.wv = Uniform(e, hp, f, ++s);
    w.mha.wl = Uniform(hp, e, f, ++s);
    w.mha.bl = Values(e, -0.1, 0.1, f, ++s);
    w.ln_gamma = Values(e, 0.5, 1.5, f, ++s);
    w.ln_beta = Values(e, -0.1, 0.1, f, ++s);
    w.mlp.w1 = Uniform(e, ff, f, ++s);
    w.mlp.b1 = Values(ff, -0.1, 0.1, f, ++s);
    w.mlp.w2 = Uniform(ff, e, f, ++s);
    w.mlp.b2 = Values(e, -0.1, 0.1, f, ++s);
    m.blocks.push_back(std::move(w));
  }
  m.unembedding = Uniform(e, cfg.vocab, f, ++s);
  return m;
}

Matrix Embed(const ToyDecoder& model, std::span<const int> tokens) {
  const size_t e = model.cfg.E;
  Matrix x(tokens.size(), e, model.cfg.fmt);
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] < 0 || tokens[i] >= model.cfg.vocab) {
      throw std::out_of_range("token " + std::to_string(tokens[i]) +
                              " outside the vocabulary");
    }
    for (size_t c = 0; c < e; ++c) x.Set(i, c, model.embedding.at(tokens[i], c));
  }
  return x;
}

Matrix ForwardNar(const ToyDecoder& model, std::span<const int> tokens) {
  Matrix x = Embed(model, tokens);
  for (const DecoderBlockWeights& w : model.blocks) {
    x = BlockTail(w, MhaBlock(x, w.mha, model.Mha()));
  }
  return GemmNaive(x, model.unembedding);
}

KVCache::KVCache(int blocks, int heads, int head_dim, Format fmt,
                 size_t capacity)
    : k_(blocks, std::vector<Matrix>(heads, Matrix(0, head_dim, fmt))),
      v_(blocks, std::vector<Matrix>(heads, Matrix(0, head_dim, fmt))),
      capacity_(capacity) {}

void KVCache::Append(int block, const std::vector<Matrix>& k,
                     const std::vector<Matrix>& v) {
  if (length_ >= capacity_) {
    throw std::length_error("KV cache full at " + std::to_string(capacity_) +
                            " tokens");
  }
  for (size_t h = 0; h < k.size(); ++h) {
    k_[block][h].AppendRows(k[h]);
    v_[block][h].AppendRows(v[h]);
  }
}

void KVCache::Advance() { ++length_; }

Matrix DecodeStep(const ToyDecoder& model, int token, KVCache& cache) {
  const int tok[1] = {token};
  Matrix x = Embed(model, tok);
  const MhaConfig mha = model.Mha();
  for (int b = 0; b < model.cfg.blocks; ++b) {
    const DecoderBlockWeights& w = model.blocks[b];
    const HeadProjections proj = ProjectHeads(x, w.mha, mha);
    cache.Append(b, proj.k, proj.v);
    x = BlockTail(w, MhaAttend(proj.q, cache.K(b), cache.V(b), w.mha, mha));
  }
  cache.Advance();
  return GemmNaive(x, model.unembedding);
}

int Argmax(std::span<const double> row) {
  if (row.empty()) throw std::invalid_argument("Argmax: empty row");
  size_t best = 0;
  for (size_t i = 1; i < row.size(); ++i) {
    if (row[i] > row[best]) best = i;
  }
  return static_cast<int>(best);
}

ArResult GenerateAr(const ToyDecoder& model, std::span<const int> prompt,
                    int n_new) {
  if (n_new < 1) throw std::invalid_argument("GenerateAr: n_new must be >= 1");
  ArResult out;
  out.tokens.assign(prompt.begin(), prompt.end());
  if (out.tokens.empty()) out.tokens.push_back(0);
  const size_t start = out.tokens.size();
  if (start + n_new > static_cast<size_t>(model.cfg.max_seq)) {
    throw std::length_error("GenerateAr: sequence exceeds max_seq");
  }
  const size_t steps = start + n_new - 1;
  KVCache cache(model.cfg.blocks, model.cfg.H, model.cfg.P, model.cfg.fmt,
                model.cfg.max_seq);
  out.logits = Matrix(0, model.cfg.vocab, model.cfg.fmt);
  for (size_t t = 0; t < steps; ++t) {
    const Matrix logits = DecodeStep(model, out.tokens[t], cache);
    out.logits.AppendRows(logits);
    if (t + 1 >= start) out.tokens.push_back(Argmax(logits.Row(0)));
  }
  out.cache_length = cache.length();
  return out;
}

}  // namespace fmsim
