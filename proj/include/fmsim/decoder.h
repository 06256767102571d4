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

#ifndef FMSIM_DECODER_H_
#define FMSIM_DECODER_H_

// Desk-scale decoder-only model with real weights, used to check that
// KV-cached autoregressive decoding reproduces the causal NAR pass.
//
// Block: MLP(LayerNorm(MHA_causal(X))), no residual connections.

#include <cstdint>
#include <span>
#include <vector>

#include "fmsim/kernels.h"
#include "fmsim/tensor.h"

namespace fmsim {

struct ToyDecoderConfig {
  int blocks = 2;
  int E = 16;
  int H = 2;
  int P = 8;
  int FF = 32;
  int vocab = 32;
  int max_seq = 64;
  Format fmt = Format::kFP64;
};

struct DecoderBlockWeights {
  MhaWeights mha;
  std::vector<double> ln_gamma;
  std::vector<double> ln_beta;
  MlpWeights mlp;
};

struct ToyDecoder {
  ToyDecoderConfig cfg;
  Matrix embedding;  // vocab x E
  std::vector<DecoderBlockWeights> blocks;
  Matrix unembedding;  // E x vocab

  MhaConfig Mha() const;
};

// Weights uniform in +-1/sqrt(fan_in), deterministic for a seed.
ToyDecoder MakeToyDecoder(const ToyDecoderConfig& cfg, uint64_t seed);

// Rows of the embedding table. Throws std::out_of_range on a bad token.
Matrix Embed(const ToyDecoder& model, std::span<const int> tokens);

// Causal pass over all tokens; returns S x vocab logits.
Matrix ForwardNar(const ToyDecoder& model, std::span<const int> tokens);

// Per block and head, the K and V rows of every token seen so far.
class KVCache {
 public:
  KVCache(int blocks, int heads, int head_dim, Format fmt, size_t capacity);

  size_t length() const { return length_; }
  size_t capacity() const { return capacity_; }
  const std::vector<Matrix>& K(int block) const { return k_[block]; }
  const std::vector<Matrix>& V(int block) const { return v_[block]; }
  // Appends one row per head. Throws std::length_error past capacity.
  void Append(int block, const std::vector<Matrix>& k,
              const std::vector<Matrix>& v);
  // Marks the current token complete in every block.
  void Advance();

 private:
  std::vector<std::vector<Matrix>> k_;
  std::vector<std::vector<Matrix>> v_;
  size_t length_ = 0;
  size_t capacity_ = 0;
};

struct ArResult {
  std::vector<int> tokens;  // prompt (or BOS) followed by generated tokens
  Matrix logits;            // one row per decoding step
  size_t cache_length = 0;
};

// Logits of one new token given the cache; appends its K/V rows.
Matrix DecodeStep(const ToyDecoder& model, int token, KVCache& cache);

// Greedy decoding (argmax, lowest index on ties). An empty prompt starts
// from token 0. Runs len(prompt) + n_new - 1 cached steps.
// Throws std::length_error when the sequence would exceed max_seq.
ArResult GenerateAr(const ToyDecoder& model, std::span<const int> prompt,
                    int n_new);

int Argmax(std::span<const double> row);

}  // namespace fmsim

#endif  // FMSIM_DECODER_H_
