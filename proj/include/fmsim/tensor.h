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

#ifndef FMSIM_TENSOR_H_
#define FMSIM_TENSOR_H_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fmsim/numerics.h"

namespace fmsim {

// Row-major 2-D matrix. Every stored element is representable in format().
class Matrix {
 public:
  Matrix() = default;
  // Zero-filled.
  Matrix(size_t rows, size_t cols, Format fmt);

  size_t rows() const { return rows_; }
  size_t cols() const { return cols_; }
  Format format() const { return fmt_; }
  size_t size() const { return data_.size(); }
  size_t ByteSize() const { return size() * ByteWidth(fmt_); }

  double at(size_t r, size_t c) const { return data_[r * cols_ + c]; }
  // Stores Quantize(v, format()).
  void Set(size_t r, size_t c, double v) {
    data_[r * cols_ + c] = Quantize(v, fmt_);
  }
  std::span<const double> Row(size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> values() const { return data_; }

  // In-place elementwise this += other, rounding each sum to format().
  void AccumulateFrom(const Matrix& other);
  // Appends the rows of `other` (same cols), rounded to format(). An empty
  // 0x0 matrix adopts the shape and format of `other`.
  void AppendRows(const Matrix& other);

  bool operator==(const Matrix& other) const = default;

 private:
  size_t rows_ = 0;
  size_t cols_ = 0;
  Format fmt_ = Format::kFP64;
  std::vector<double> data_;
};

struct TileSpec {
  size_t row_offset = 0;
  size_t col_offset = 0;
  size_t tile_rows = 0;
  size_t tile_cols = 0;
};

// Throws std::invalid_argument when values.size() != rows * cols.
Matrix Materialize(size_t rows, size_t cols, Format fmt,
                   std::span<const double> values);

// Copy of a sub-block. Throws std::out_of_range when it does not fit.
Matrix Tile(const Matrix& m, const TileSpec& spec);
// Writes `tile` into `dst` at the tile's offsets.
void PlaceTile(Matrix& dst, const Matrix& tile, const TileSpec& spec);

// Re-rounds every element into `fmt`.
Matrix Convert(const Matrix& m, Format fmt);
Matrix Transpose(const Matrix& m);
// Concatenates along columns.
Matrix ConcatCols(std::span<const Matrix> parts);

// Uniform in [lo, hi) then quantized; deterministic for a fixed seed.
Matrix SeededRandom(size_t rows, size_t cols, Format fmt, uint64_t seed,
                    double lo = -1.0, double hi = 1.0);

double MaxAbsDiff(const Matrix& a, const Matrix& b);
double MaxAbs(const Matrix& m);

// Golden-file container: "TFM1", u32 rows, u32 cols, u32 format code,
// then rows*cols little-endian FP64 values.
void WriteMatrix(std::ostream& out, const Matrix& m);
Matrix ReadMatrix(std::istream& in);
void SaveMatrix(const std::string& path, const Matrix& m);
Matrix LoadMatrix(const std::string& path);

}  // namespace fmsim

#endif  // FMSIM_TENSOR_H_
