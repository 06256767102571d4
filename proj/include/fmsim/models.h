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

#ifndef FMSIM_MODELS_H_
#define FMSIM_MODELS_H_

// Transformer model descriptions and their analytic FLOP and HBM traffic
// accounting.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "fmsim/machine.h"
#include "fmsim/numerics.h"
#include "json.hpp"

namespace fmsim {

enum class ModelFamily : uint8_t { kEncoder, kDecoder };

struct ModelConfig {
  std::string name;
  ModelFamily family = ModelFamily::kDecoder;
  int blocks = 1;
  int64_t E = 1;
  int64_t P = 1;
  int64_t H = 1;
  int64_t FF = 1;
  int64_t seq_min = 1;
  int64_t seq_max = 1;
  int64_t seq_default = 1;
  double params = 0;
  // Encoder image geometry: patches of patch_size^2 * channels values.
  int64_t patches = 196;
  int64_t patch_size = 16;
  int64_t channels = 3;
  int64_t classes = 1000;

  int64_t HP() const { return H * P; }
  bool is_vit() const { return family == ModelFamily::kEncoder; }
  // Throws std::invalid_argument naming the offending field.
  void Validate() const;
};

// "vit-b", "vit-l", "vit-h", "gpt3-xl", "gpt-j".
const std::vector<ModelConfig>& ModelPresets();
// Throws std::invalid_argument listing the preset names.
ModelConfig PresetModel(std::string_view name);
std::string PresetNames();

ModelConfig ModelConfigFromJson(const nlohmann::json& j);
nlohmann::json ModelConfigToJson(const ModelConfig& m);
ModelConfig LoadModelConfig(const std::string& path);

enum class RunMode : uint8_t { kNar, kAr, kVit };
std::string_view RunModeName(RunMode mode);
RunMode ParseRunMode(std::string_view name);

// FLOPs of one block for `queries` query rows attending to `keys` keys.
struct BlockFlops {
  double qkv = 0;
  double scores = 0;
  double av = 0;
  double out_proj = 0;
  double mlp = 0;
  double layernorm = 0;
  double gelu = 0;
  double softmax = 0;

  double total() const {
    return qkv + scores + av + out_proj + mlp + layernorm + gelu + softmax;
  }
};

BlockFlops CountBlockFlops(const ModelConfig& m, int64_t queries, int64_t keys,
                           const ActivationCosts& act = {});

// NAR and VIT: one pass over S tokens (VIT adds patch embedding and the
// classifier). AR: the invocation that produces token S, i.e. one query
// against S cached keys.
double CountFlops(const ModelConfig& m, RunMode mode, int64_t S,
                  const ActivationCosts& act = {});

struct TrafficItem {
  std::string tensor;
  double read_bytes = 0;
  double write_bytes = 0;
};

struct TrafficReport {
  std::vector<TrafficItem> per_block;    // one block's tensor movements
  std::vector<TrafficItem> model_level;  // outside the blocks
  double block_read_bytes = 0;
  double block_write_bytes = 0;
  double read_bytes = 0;   // whole model
  double write_bytes = 0;
  std::string assumption;
};

// Tensor movements between HBM and the clusters. Each block reads its
// input and weights and writes its output; the unfused schedule also
// round-trips Q/K/V, the attention scores, the head outputs and the GELU
// input. AR counts one decoding invocation with S cached keys.
TrafficReport HbmTraffic(const ModelConfig& m, RunMode mode, int64_t S,
                         bool fused, Format fmt = Format::kFP16);

nlohmann::json TrafficToJson(const TrafficReport& t);

}  // namespace fmsim

#endif  // FMSIM_MODELS_H_
