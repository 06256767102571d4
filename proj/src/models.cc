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

#include "fmsim/models.h"

#include <fstream>
#include <stdexcept>

namespace fmsim {
namespace {

using nlohmann::json;

[[noreturn]] void FieldError(const std::string& field,
                             const std::string& what) {
  throw std::invalid_argument("model config field '" + field + "': " + what);
}

ModelConfig Make(std::string name, ModelFamily family, int blocks, int64_t e,
                 int64_t p, int64_t h, int64_t ff, int64_t s_min,
                 int64_t s_max, int64_t s_default, double params) {
  ModelConfig m;
  m.name = std::move(name);
  m.family = family;
  m.blocks = blocks;
  m.E = e;
  m.P = p;
  m.H = h;
  m.FF = ff;
  m.seq_min = s_min;
  m.seq_max = s_max;
  m.seq_default = s_default;
  m.params = params;
  return m;
}

}  // namespace

void ModelConfig::Validate() const {
  if (name.empty()) FieldError("name", "must not be empty");
  if (blocks < 0) FieldError("blocks", "must be non-negative");
  if (E < 1) FieldError("E", "must be positive");
  if (P < 1) FieldError("P", "must be positive");
  if (H < 1) FieldError("H", "must be positive");
  if (FF < 1) FieldError("FF", "must be positive");
  if (seq_min < 1) FieldError("seq_min", "must be positive");
  if (seq_max < seq_min) FieldError("seq_max", "must be >= seq_min");
  if (seq_default < seq_min || seq_default > seq_max) {
    FieldError("seq_default", "must lie in [seq_min, seq_max]");
  }
  if (is_vit()) {
    if (patches < 1) FieldError("patches", "must be positive");
    if (patch_size < 1) FieldError("patch_size", "must be positive");
    if (channels < 1) FieldError("channels", "must be positive");
    if (classes < 1) FieldError("classes", "must be positive");
  }
}

const std::vector<ModelConfig>& ModelPresets() {
  static const std::vector<ModelConfig> presets = {
      Make("vit-b", ModelFamily::kEncoder, 12, 768, 64, 12, 3072, 197, 197,
           197, 86e6),
      Make("vit-l", ModelFamily::kEncoder, 24, 1024, 64, 16, 4096, 197, 197,
           197, 307e6),
      Make("vit-h", ModelFamily::kEncoder, 32, 1280, 80, 16, 5120, 197, 197,
           197, 632e6),
      Make("gpt3-xl", ModelFamily::kDecoder, 40, 2048, 128, 16, 8192, 128,
           2048, 1024, 1.3e9),
      Make("gpt-j", ModelFamily::kDecoder, 28, 4096, 256, 16, 16384, 128,
           2048, 1024, 6e9),
  };
  return presets;
}

std::string PresetNames() {
  std::string out;
  for (const auto& m : ModelPresets()) {
    if (!out.empty()) out += ", ";
    out += m.name;
  }
  return out;
}

ModelConfig PresetModel(std::string_view name) {
  for (const auto& m : ModelPresets()) {
    if (m.name == name) return m;
  }
  throw std::invalid_argument("unknown model '" + std::string(name) +
                              "'; presets: " + PresetNames());
}

ModelConfig ModelConfigFromJson(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("model config: expected a JSON object");
  ModelConfig m;
  bool have_default = false;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "name") {
        m.name = value.get<std::string>();
      } else if (key == "family") {
        const auto f = value.get<std::string>();
        if (f == "encoder") {
          m.family = ModelFamily::kEncoder;
        } else if (f == "decoder") {
          m.family = ModelFamily::kDecoder;
        } else {
          FieldError(key, "expected 'encoder' or 'decoder'");
        }
      } else if (key == "blocks") {
        m.blocks = value.get<int>();
      } else if (key == "E") {
        m.E = value.get<int64_t>();
      } else if (key == "P") {
        m.P = value.get<int64_t>();
      } else if (key == "H") {
        m.H = value.get<int64_t>();
      } else if (key == "FF") {
        m.FF = value.get<int64_t>();
      } else if (key == "seq_min") {
        m.seq_min = value.get<int64_t>();
      } else if (key == "seq_max") {
        m.seq_max = value.get<int64_t>();
      } else if (key == "S_default" || key == "seq_default") {
        m.seq_default = value.get<int64_t>();
        have_default = true;
      } else if (key == "params") {
        m.params = value.get<double>();
      } else if (key == "patches") {
        m.patches = value.get<int64_t>();
      } else if (key == "patch_size") {
        m.patch_size = value.get<int64_t>();
      } else if (key == "channels") {
        m.channels = value.get<int64_t>();
      } else if (key == "classes") {
        m.classes = value.get<int64_t>();
      } else {
        FieldError(key, "unknown key");
      }
    } catch (const json::exception& e) {
      FieldError(key, e.what());
    }
  }
  if (!have_default) m.seq_default = m.seq_max;
  m.Validate();
  return m;
}

json ModelConfigToJson(const ModelConfig& m) {
  json j = {{"name", m.name},
            {"family", m.is_vit() ? "encoder" : "decoder"},
            {"blocks", m.blocks},
            {"E", m.E},
            {"P", m.P},
            {"H", m.H},
            {"FF", m.FF},
            {"seq_min", m.seq_min},
            {"seq_max", m.seq_max},
            {"S_default", m.seq_default},
            {"params", m.params}};
  if (m.is_vit()) {
    j["patches"] = m.patches;
    j["patch_size"] = m.patch_size;
    j["channels"] = m.channels;
    j["classes"] = m.classes;
  }
  return j;
}

ModelConfig LoadModelConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open model config " + path);
  try {
    return ModelConfigFromJson(json::parse(in));
  } catch (const json::exception& e) {
    throw std::invalid_argument("model config " + path + ": " + e.what());
  }
}

std::string_view RunModeName(RunMode mode) {
  switch (mode) {
    case RunMode::kNar:
      return "nar";
    case RunMode::kAr:
      return "ar";
    case RunMode::kVit:
      return "vit";
  }
  return "nar";
}

RunMode ParseRunMode(std::string_view name) {
  if (name == "nar") return RunMode::kNar;
  if (name == "ar") return RunMode::kAr;
  if (name == "vit") return RunMode::kVit;
  throw std::invalid_argument("unknown mode '" + std::string(name) +
                              "'; valid modes: nar, ar, vit");
}

BlockFlops CountBlockFlops(const ModelConfig& m, int64_t queries, int64_t keys,
                           const ActivationCosts& act) {
  const double q = static_cast<double>(queries);
  const double k = static_cast<double>(keys);
  const double e = m.E, hp = m.HP(), h = m.H, p = m.P, ff = m.FF;
  BlockFlops f;
  f.qkv = 3 * 2 * q * e * hp;
  f.scores = 2 * h * q * k * p;
  f.av = 2 * h * q * k * p;
  f.out_proj = 2 * q * hp * e;
  f.mlp = 2 * q * e * ff * 2;
  f.layernorm = act.layernorm_flops * q * e;
  f.gelu = act.gelu_flops * q * ff;
  f.softmax = act.softmax_flops * h * q * k;
  return f;
}

double CountFlops(const ModelConfig& m, RunMode mode, int64_t S,
                  const ActivationCosts& act) {
  if (S < 1) throw std::invalid_argument("CountFlops: S must be >= 1");
  if (mode == RunMode::kAr) {
    return m.blocks * CountBlockFlops(m, 1, S, act).total();
  }
  double flops = m.blocks * CountBlockFlops(m, S, S, act).total();
  if (mode == RunMode::kVit) {
    const double patch_dim =
        static_cast<double>(m.patch_size) * m.patch_size * m.channels;
    flops += 2.0 * m.patches * patch_dim * m.E;
    flops += 2.0 * m.E * m.classes;
  }
  return flops;
}

TrafficReport HbmTraffic(const ModelConfig& m, RunMode mode, int64_t S,
                         bool fused, Format fmt) {
  if (S < 1) throw std::invalid_argument("HbmTraffic: S must be >= 1");
  const double a = ByteWidth(fmt);
  const double e = m.E, hp = m.HP(), h = m.H, ff = m.FF;
  const double q = mode == RunMode::kAr ? 1.0 : static_cast<double>(S);
  const double k = static_cast<double>(S);
  TrafficReport t;
  auto& items = t.per_block;
  items.push_back({"block_input", q * e * a, 0});
  items.push_back({"w_qkv", 3 * e * hp * a, 0});
  items.push_back({"w_out", hp * e * a, 0});
  items.push_back({"w_mlp1", e * ff * a, 0});
  items.push_back({"w_mlp2", ff * e * a, 0});
  items.push_back({"layernorm_params", 2 * e * a, 0});
  if (mode == RunMode::kAr) {
    items.push_back({"kv_cache", 2 * (k - 1) * hp * a, 2 * hp * a});
  }
  items.push_back({"block_output", 0, q * e * a});
  if (!fused) {
    items.push_back({"qkv_activations", 3 * q * hp * a, 3 * q * hp * a});
    items.push_back({"attention_scores", h * q * k * a, h * q * k * a});
    items.push_back({"head_outputs", q * hp * a, q * hp * a});
    items.push_back({"gelu_input", q * ff * a, q * ff * a});
  }
  for (const auto& it : items) {
    t.block_read_bytes += it.read_bytes;
    t.block_write_bytes += it.write_bytes;
  }
  if (m.blocks == 0) {
    t.model_level.push_back({"model_input", q * e * a, 0});
    t.model_level.push_back({"model_output", 0, q * e * a});
  }
  if (mode == RunMode::kVit) {
    const double patch_dim =
        static_cast<double>(m.patch_size) * m.patch_size * m.channels;
    t.model_level.push_back({"patch_pixels", m.patches * patch_dim * a, 0});
    t.model_level.push_back({"w_patch_embedding", patch_dim * e * a, 0});
    t.model_level.push_back({"w_classifier", e * m.classes * a, 0});
    t.model_level.push_back({"logits", 0, static_cast<double>(m.classes) * a});
  }
  t.read_bytes = m.blocks * t.block_read_bytes;
  t.write_bytes = m.blocks * t.block_write_bytes;
  for (const auto& it : t.model_level) {
    t.read_bytes += it.read_bytes;
    t.write_bytes += it.write_bytes;
  }
  t.assumption = "tensor sizes at " + std::string(FormatName(fmt)) +
                 " width; softmax statistics stay in the scratchpad";
  return t;
}

json TrafficToJson(const TrafficReport& t) {
  auto list = [](const std::vector<TrafficItem>& items) {
    json arr = json::array();
    for (const auto& it : items) {
      arr.push_back({{"tensor", it.tensor},
                     {"read_bytes", it.read_bytes},
                     {"write_bytes", it.write_bytes}});
    }
    return arr;
  };
  return {{"per_block", list(t.per_block)},
          {"model_level", list(t.model_level)},
          {"block_read_bytes", t.block_read_bytes},
          {"block_write_bytes", t.block_write_bytes},
          {"read_bytes", t.read_bytes},
          {"write_bytes", t.write_bytes},
          {"assumption", t.assumption}};
}

}  // namespace fmsim
