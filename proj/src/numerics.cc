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

#include "fmsim/numerics.h"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace fmsim {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

constexpr std::array<FloatFormat, 6> kFormats = {{
    {Format::kFP64, "fp64", 11, 52, 1023, 1, true,
     std::numeric_limits<double>::max()},
    {Format::kFP32, "fp32", 8, 23, 127, 2, true,
     static_cast<double>(std::numeric_limits<float>::max())},
    {Format::kFP16, "fp16", 5, 10, 15, 4, true, 65504.0},
    {Format::kBF16, "bf16", 8, 7, 127, 4, true,
     0x1.fep127},  // (2 - 2^-7) * 2^127
    {Format::kFP8E4M3, "fp8e4m3", 4, 3, 7, 8, false, 448.0},
    {Format::kFP8E5M2, "fp8e5m2", 5, 2, 15, 8, true, 57344.0},
}};

// Rounds |x| onto a grid with `mantissa_bits` fraction bits and minimum
// normal exponent `min_exp`. No overflow handling.
double RoundToGrid(double x, int mantissa_bits, int min_exp) {
  if (x == 0.0 || !std::isfinite(x)) return x;
  int e;
  std::frexp(x, &e);  // |x| = f * 2^e, f in [0.5, 1)
  const int exp = std::max(e - 1, min_exp);
  const int shift = exp - mantissa_bits;
  return std::ldexp(std::nearbyint(std::ldexp(x, -shift)), shift);
}

bool IsMidpoint(double s, const FloatFormat& f) {
  return RoundToGrid(s, f.mantissa_bits + 1, f.min_exponent()) == s &&
         RoundToGrid(s, f.mantissa_bits, f.min_exponent()) != s;
}

}  // namespace

double FloatFormat::min_subnormal() const {
  return std::ldexp(1.0, min_exponent() - mantissa_bits);
}

const std::array<FloatFormat, 6>& FormatTable() { return kFormats; }

const FloatFormat& Lookup(Format fmt) {
  return kFormats[static_cast<size_t>(fmt)];
}

std::string_view FormatName(Format fmt) { return Lookup(fmt).name; }

std::string ValidFormatNames() {
  std::string out;
  for (const auto& f : kFormats) {
    if (!out.empty()) out += ", ";
    out += f.name;
  }
  return out;
}

Format ParseFormat(std::string_view name) {
  for (const auto& f : kFormats) {
    if (f.name == name) return f.id;
  }
  throw std::invalid_argument("unknown format '" + std::string(name) +
                              "'; valid formats: " + ValidFormatNames());
}

bool IsFp8(Format fmt) {
  return fmt == Format::kFP8E4M3 || fmt == Format::kFP8E5M2;
}

bool IsNarrower(Format a, Format b) {
  return Lookup(a).bit_width() < Lookup(b).bit_width();
}

double Quantize(double x, Format fmt) {
  if (fmt == Format::kFP64 || std::isnan(x)) return x;
  const FloatFormat& f = Lookup(fmt);
  if (std::isinf(x)) {
    return f.has_infinity ? x : std::copysign(f.max_finite, x);
  }
  const double r = RoundToGrid(x, f.mantissa_bits, f.min_exponent());
  if (std::fabs(r) > f.max_finite) {
    return std::copysign(f.has_infinity ? kInf : f.max_finite, x);
  }
  return r;
}

double QuantizedAdd(double a, double b, Format fmt) {
  const double s = a + b;
  if (fmt == Format::kFP64 || !std::isfinite(s)) return Quantize(s, fmt);
  // TwoSum: s + err == a + b exactly.
  const double bb = s - a;
  const double err = (a - (s - bb)) + (b - bb);
  if (err != 0.0 && IsMidpoint(s, Lookup(fmt))) {
    // The exact sum lies strictly off the tie; step toward it.
    return Quantize(std::nextafter(s, err > 0 ? kInf : -kInf), fmt);
  }
  return Quantize(s, fmt);
}

Format DefaultAccumulator(Format in_fmt) {
  switch (in_fmt) {
    case Format::kFP64:
      return Format::kFP64;
    case Format::kFP32:
    case Format::kFP16:
    case Format::kBF16:
      return Format::kFP32;
    case Format::kFP8E4M3:
    case Format::kFP8E5M2:
      return Format::kFP16;
  }
  return Format::kFP64;
}

Format StatsFormat(Format compute_fmt) {
  return compute_fmt == Format::kFP64 ? Format::kFP64 : Format::kFP32;
}

bool IsSupportedWidening(Format in_fmt, Format acc_fmt) {
  if (acc_fmt == Format::kFP64) return true;
  switch (in_fmt) {
    case Format::kFP64:
      return false;
    case Format::kFP32:
      return acc_fmt == Format::kFP32;
    case Format::kFP16:
    case Format::kBF16:
      return acc_fmt == Format::kFP32;
    case Format::kFP8E4M3:
    case Format::kFP8E5M2:
      return acc_fmt == Format::kFP16 || acc_fmt == Format::kFP32;
  }
  return false;
}

double WideningDotStrided(const double* a, const double* b, size_t n,
                          size_t b_stride, Format acc_fmt, double init) {
  double acc = init;
  if (acc_fmt == Format::kFP64) {
    for (size_t i = 0; i < n; ++i) acc += a[i] * b[i * b_stride];
    return acc;
  }
  for (size_t i = 0; i < n; ++i) {
    acc = QuantizedAdd(acc, a[i] * b[i * b_stride], acc_fmt);
  }
  return acc;
}

double WideningDot(std::span<const double> a, std::span<const double> b,
                   Format in_fmt, Format acc_fmt) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("WideningDot: length mismatch");
  }
  if (!IsSupportedWidening(in_fmt, acc_fmt)) {
    throw std::invalid_argument(
        "WideningDot: unsupported pair " + std::string(FormatName(in_fmt)) +
        " -> " + std::string(FormatName(acc_fmt)));
  }
  return WideningDotStrided(a.data(), b.data(), a.size(), 1, acc_fmt);
}

}  // namespace fmsim
