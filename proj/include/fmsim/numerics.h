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

#ifndef FMSIM_NUMERICS_H_
#define FMSIM_NUMERICS_H_

// Software emulation of the FPU number formats. Values are carried as
// doubles that are exactly representable in their format; every write
// goes through Quantize().

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace fmsim {

enum class Format : uint8_t { kFP64, kFP32, kFP16, kBF16, kFP8E4M3, kFP8E5M2 };

inline constexpr std::array<Format, 6> kAllFormats = {
    Format::kFP64, Format::kFP32,    Format::kFP16,
    Format::kBF16, Format::kFP8E4M3, Format::kFP8E5M2};

struct FloatFormat {
  Format id;
  std::string_view name;  // Serialized name, e.g. "fp8e4m3".
  int exponent_bits;
  int mantissa_bits;
  int bias;
  int simd_lanes;  // Lanes on the 64-bit FPU datapath.
  // E4M3 has no infinities; overflow saturates to max_finite.
  bool has_infinity;
  double max_finite;

  int bit_width() const { return 1 + exponent_bits + mantissa_bits; }
  int byte_width() const { return bit_width() / 8; }
  int min_exponent() const { return 1 - bias; }
  double min_subnormal() const;
};

// The six supported formats, in Format enum order.
const std::array<FloatFormat, 6>& FormatTable();
const FloatFormat& Lookup(Format fmt);

std::string_view FormatName(Format fmt);
// Throws std::invalid_argument listing the valid names on failure.
Format ParseFormat(std::string_view name);
std::string ValidFormatNames();

inline int ByteWidth(Format fmt) { return Lookup(fmt).byte_width(); }
inline int SimdLanes(Format fmt) { return Lookup(fmt).simd_lanes; }
bool IsFp8(Format fmt);
// True when `a` has strictly fewer bits than `b`.
bool IsNarrower(Format a, Format b);

// Nearest representable value under round-to-nearest-even, with
// subnormals. NaN stays NaN.
double Quantize(double x, Format fmt);

// Quantize(a + b) computed as if the sum were exact before rounding.
double QuantizedAdd(double a, double b, Format fmt);

// Accumulator used by the widening dot product for a given input format.
Format DefaultAccumulator(Format in_fmt);
// Precision of softmax/normalization statistics: FP32, or FP64 for FP64.
Format StatsFormat(Format compute_fmt);

bool IsSupportedWidening(Format in_fmt, Format acc_fmt);

// Products are exact; every addition rounds to acc_fmt, left to right.
// Throws std::invalid_argument on length mismatch or an unsupported pair.
double WideningDot(std::span<const double> a, std::span<const double> b,
                   Format in_fmt, Format acc_fmt);

// Strided variant used by the matrix kernels (b[i * b_stride]).
double WideningDotStrided(const double* a, const double* b, size_t n,
                          size_t b_stride, Format acc_fmt,
                          double init = 0.0);

}  // namespace fmsim

#endif  // FMSIM_NUMERICS_H_
