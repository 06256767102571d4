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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "fmsim/numerics.h"
#include "oracles.h"

namespace fmsim {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

TEST(FormatTable, WidthsAndLanes) {
  const int widths[] = {64, 32, 16, 16, 8, 8};
  for (Format f : kAllFormats) {
    const FloatFormat& ff = Lookup(f);
    EXPECT_EQ(ff.exponent_bits + ff.mantissa_bits + 1,
              widths[static_cast<int>(f)]);
    EXPECT_EQ(ff.simd_lanes * ff.bit_width(), 64);
    EXPECT_EQ(ParseFormat(ff.name), f);
  }
  EXPECT_EQ(Lookup(Format::kFP8E4M3).mantissa_bits, 3);
  EXPECT_EQ(Lookup(Format::kFP8E4M3).exponent_bits, 4);
  EXPECT_EQ(Lookup(Format::kFP8E5M2).mantissa_bits, 2);
  EXPECT_EQ(Lookup(Format::kFP8E5M2).exponent_bits, 5);
  EXPECT_EQ(Lookup(Format::kFP64).simd_lanes, 1);
  EXPECT_EQ(Lookup(Format::kFP8E4M3).simd_lanes, 8);
  EXPECT_EQ(Lookup(Format::kBF16).mantissa_bits, 7);
}

TEST(FormatTable, ParseErrorListsNames) {
  try {
    ParseFormat("fp12");
    FAIL();
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    for (const char* n : {"fp64", "fp32", "fp16", "bf16", "fp8e4m3", "fp8e5m2"}) {
      EXPECT_NE(msg.find(n), std::string::npos) << n;
    }
  }
}

TEST(FormatTable, MaxFiniteMatchesEnumeration) {
  for (Format f : {Format::kFP16, Format::kBF16, Format::kFP8E4M3,
                   Format::kFP8E5M2}) {
    oracle::NearestValue nv(f);
    EXPECT_EQ(Lookup(f).max_finite, nv.max_finite()) << FormatName(f);
  }
  EXPECT_EQ(Lookup(Format::kFP8E4M3).max_finite, 448.0);
  EXPECT_EQ(Lookup(Format::kFP8E5M2).max_finite, 57344.0);
  EXPECT_EQ(Lookup(Format::kFP16).max_finite, 65504.0);
}

TEST(Quantize, Examples) {
  EXPECT_EQ(Quantize(1.0, Format::kFP8E4M3), 1.0);
  EXPECT_EQ(Quantize(std::ldexp(1.0, -25), Format::kFP16), 0.0);
  EXPECT_EQ(Quantize(10000.0, Format::kFP8E4M3), 448.0);
  EXPECT_EQ(Quantize(-10000.0, Format::kFP8E4M3), -448.0);
  EXPECT_EQ(Quantize(1e6, Format::kFP8E5M2), kInf);
  EXPECT_EQ(Quantize(kInf, Format::kFP8E4M3), 448.0);
  EXPECT_EQ(Quantize(0.3, Format::kFP8E4M3), 0.3125);
  EXPECT_TRUE(std::isnan(Quantize(NAN, Format::kFP16)));
}

TEST(Quantize, Fp16OverflowBoundary) {
  // 65520 is the midpoint between 65504 and the first value past max;
  // ties-to-even picks the even side, which is infinity.
  EXPECT_EQ(Quantize(65519.99, Format::kFP16), 65504.0);
  EXPECT_EQ(Quantize(65520.0, Format::kFP16), kInf);
  EXPECT_EQ(oracle::Round(65520.0, Format::kFP16), kInf);
}

TEST(Quantize, SubnormalsSurvive) {
  const double tiny = std::ldexp(1.0, -24);
  EXPECT_EQ(Quantize(tiny, Format::kFP16), tiny);
  EXPECT_EQ(Quantize(std::ldexp(1.0, -9), Format::kFP8E4M3),
            std::ldexp(1.0, -9));
  EXPECT_EQ(Lookup(Format::kFP8E4M3).min_subnormal(), std::ldexp(1.0, -9));
  EXPECT_EQ(Lookup(Format::kFP8E5M2).min_subnormal(), std::ldexp(1.0, -16));
}

// Every narrow format against the enumeration oracle, on random values,
// exact midpoints and each representable value.
TEST(QuantizeProperty, MatchesEnumerationOracle) {
  oracle::Gen g(11);
  for (Format f : {Format::kFP16, Format::kBF16, Format::kFP8E4M3,
                   Format::kFP8E5M2}) {
    const auto values = oracle::PositiveValues(f);
    for (double v : values) {
      ASSERT_EQ(Quantize(v, f), v);
      ASSERT_EQ(Quantize(-v, f), -v);
    }
    for (int i = 0; i < 20000; ++i) {
      const double x = g.Wide(-30, 18);
      ASSERT_EQ(Quantize(x, f), oracle::Round(x, f)) << x << " " << FormatName(f);
      const double mid = g.Midpoint(values);
      ASSERT_EQ(Quantize(mid, f), oracle::Round(mid, f))
          << mid << " " << FormatName(f);
    }
  }
}

TEST(QuantizeProperty, Fp32MatchesHostConversion) {
  oracle::Gen g(12);
  for (int i = 0; i < 100000; ++i) {
    const double x = g.Wide(-160, 130);
    ASSERT_EQ(Quantize(x, Format::kFP32), oracle::Round(x, Format::kFP32)) << x;
  }
}

TEST(QuantizeProperty, IdempotentMonotoneAndSymmetric) {
  oracle::Gen g(13);
  for (Format f : kAllFormats) {
    for (int i = 0; i < 20000; ++i) {
      const double x = g.Wide(-30, 20);
      const double y = g.Wide(-30, 20);
      const double qx = Quantize(x, f);
      ASSERT_EQ(Quantize(qx, f), qx);
      ASSERT_EQ(Quantize(-x, f), -qx);
      if (x <= y) {
        ASSERT_LE(qx, Quantize(y, f));
      } else {
        ASSERT_GE(qx, Quantize(y, f));
      }
    }
  }
}

TEST(QuantizeProperty, NarrowerIsExactInWider) {
  for (Format narrow : {Format::kFP8E4M3, Format::kFP8E5M2, Format::kFP16}) {
    for (double v : oracle::PositiveValues(narrow)) {
      for (Format wide : {Format::kFP16, Format::kFP32, Format::kFP64}) {
        if (!IsNarrower(narrow, wide)) continue;
        ASSERT_EQ(Quantize(v, wide), v);
      }
    }
  }
}

TEST(QuantizedAdd, RoundsTheExactSum) {
  oracle::Gen g(14);
  for (Format f : {Format::kFP32, Format::kFP16, Format::kBF16}) {
    for (int i = 0; i < 50000; ++i) {
      const double a = Quantize(g.Wide(-20, 10), f);
      const double b = g.Wide(-50, 10);
      ASSERT_EQ(QuantizedAdd(a, b, f), oracle::RoundedFma(a, b, 1.0, f))
          << a << " + " << b << " in " << FormatName(f);
    }
  }
}

TEST(QuantizedAdd, BreaksDoubleRoundingTie) {
  // 1 + 2^-24 is a float tie; a tiny extra term must push it up.
  const double a = 1.0;
  const double b = std::ldexp(1.0, -24) + std::ldexp(1.0, -70);
  EXPECT_EQ(QuantizedAdd(a, b, Format::kFP32), 1.0 + std::ldexp(1.0, -23));
}

TEST(WideningDot, Examples) {
  const std::vector<double> ones = {1, 1, 1, 1};
  EXPECT_EQ(WideningDot(ones, ones, Format::kFP8E4M3, Format::kFP16), 4.0);
  EXPECT_EQ(WideningDot({}, {}, Format::kFP64, Format::kFP64), 0.0);
  EXPECT_THROW(WideningDot(ones, std::vector<double>{1.0}, Format::kFP64,
                           Format::kFP64),
               std::invalid_argument);
  EXPECT_THROW(WideningDot(ones, ones, Format::kFP64, Format::kFP16),
               std::invalid_argument);
}

TEST(WideningDot, MatchesScalarOracle) {
  oracle::Gen g(15);
  struct Pair {
    Format in, acc;
  };
  for (Pair p : {Pair{Format::kFP8E5M2, Format::kFP32},
                 Pair{Format::kFP8E4M3, Format::kFP16},
                 Pair{Format::kFP8E5M2, Format::kFP16},
                 Pair{Format::kFP16, Format::kFP32},
                 Pair{Format::kBF16, Format::kFP32},
                 Pair{Format::kFP32, Format::kFP32},
                 Pair{Format::kFP64, Format::kFP64}}) {
    for (int trial = 0; trial < 200; ++trial) {
      const size_t n = static_cast<size_t>(g.Int(0, 64));
      std::vector<double> a(n), b(n);
      for (size_t i = 0; i < n; ++i) {
        a[i] = oracle::Round(g.Uniform(-4, 4), p.in);
        b[i] = oracle::Round(g.Uniform(-4, 4), p.in);
      }
      ASSERT_EQ(WideningDot(a, b, p.in, p.acc), oracle::ScalarDot(a, b, p.acc))
          << FormatName(p.in) << "->" << FormatName(p.acc) << " n=" << n;
    }
  }
}

TEST(WideningDot, Fp64IsLeftToRight) {
  oracle::Gen g(16);
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = g.Vector(33, -1, 1);
    const auto b = g.Vector(33, -1, 1);
    double s = 0;
    for (size_t i = 0; i < a.size(); ++i) s = s + a[i] * b[i];
    ASSERT_EQ(WideningDot(a, b, Format::kFP64, Format::kFP64), s);
  }
}

TEST(Formats, AccumulatorAndStats) {
  EXPECT_EQ(DefaultAccumulator(Format::kFP64), Format::kFP64);
  EXPECT_EQ(DefaultAccumulator(Format::kFP32), Format::kFP32);
  EXPECT_EQ(DefaultAccumulator(Format::kFP16), Format::kFP32);
  EXPECT_EQ(DefaultAccumulator(Format::kBF16), Format::kFP32);
  EXPECT_EQ(DefaultAccumulator(Format::kFP8E4M3), Format::kFP16);
  EXPECT_EQ(DefaultAccumulator(Format::kFP8E5M2), Format::kFP16);
  EXPECT_EQ(StatsFormat(Format::kFP64), Format::kFP64);
  for (Format f : {Format::kFP32, Format::kFP16, Format::kFP8E4M3}) {
    EXPECT_EQ(StatsFormat(f), Format::kFP32);
  }
  for (Format f : kAllFormats) {
    EXPECT_TRUE(IsSupportedWidening(f, DefaultAccumulator(f)));
  }
}

}  // namespace
}  // namespace fmsim
