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

#include "fmsim/tensor.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <stdexcept>

namespace fmsim {
namespace {

constexpr char kMagic[4] = {'T', 'F', 'M', '1'};

void PutU32(std::ostream& out, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t GetU32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw std::runtime_error("matrix file: truncated header");
  }
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

Matrix::Matrix(size_t rows, size_t cols, Format fmt)
    : rows_(rows), cols_(cols), fmt_(fmt), data_(rows * cols, 0.0) {}

void Matrix::AccumulateFrom(const Matrix& other) {
  if (other.rows_ != rows_ || other.cols_ != cols_) {
    throw std::invalid_argument("AccumulateFrom: shape mismatch");
  }
  for (size_t i = 0; i < data_.size(); ++i) {
    data_[i] = QuantizedAdd(data_[i], other.data_[i], fmt_);
  }
}

void Matrix::AppendRows(const Matrix& other) {
  if (rows_ == 0 && cols_ == 0) {
    cols_ = other.cols_;
    fmt_ = other.fmt_;
  }
  if (other.cols_ != cols_) {
    throw std::invalid_argument("AppendRows: column mismatch");
  }
  for (double v : other.data_) data_.push_back(Quantize(v, fmt_));
  rows_ += other.rows_;
}

Matrix Materialize(size_t rows, size_t cols, Format fmt,
                   std::span<const double> values) {
  if (values.size() != rows * cols) {
    throw std::invalid_argument("Materialize: expected " +
                                std::to_string(rows * cols) + " values, got " +
                                std::to_string(values.size()));
  }
  Matrix m(rows, cols, fmt);
  for (size_t r = 0; r < rows; ++r) {
    for (size_t c = 0; c < cols; ++c) m.Set(r, c, values[r * cols + c]);
  }
  return m;
}

Matrix Tile(const Matrix& m, const TileSpec& spec) {
  if (spec.row_offset + spec.tile_rows > m.rows() ||
      spec.col_offset + spec.tile_cols > m.cols()) {
    throw std::out_of_range("Tile: spec exceeds parent matrix");
  }
  Matrix t(spec.tile_rows, spec.tile_cols, m.format());
  for (size_t r = 0; r < spec.tile_rows; ++r) {
    for (size_t c = 0; c < spec.tile_cols; ++c) {
      t.Set(r, c, m.at(spec.row_offset + r, spec.col_offset + c));
    }
  }
  return t;
}

void PlaceTile(Matrix& dst, const Matrix& tile, const TileSpec& spec) {
  if (tile.rows() != spec.tile_rows || tile.cols() != spec.tile_cols ||
      spec.row_offset + spec.tile_rows > dst.rows() ||
      spec.col_offset + spec.tile_cols > dst.cols()) {
    throw std::out_of_range("PlaceTile: spec exceeds destination");
  }
  for (size_t r = 0; r < spec.tile_rows; ++r) {
    for (size_t c = 0; c < spec.tile_cols; ++c) {
      dst.Set(spec.row_offset + r, spec.col_offset + c, tile.at(r, c));
    }
  }
}

Matrix Convert(const Matrix& m, Format fmt) {
  if (m.format() == fmt) return m;
  return Materialize(m.rows(), m.cols(), fmt, m.values());
}

Matrix Transpose(const Matrix& m) {
  Matrix t(m.cols(), m.rows(), m.format());
  for (size_t r = 0; r < m.rows(); ++r) {
    for (size_t c = 0; c < m.cols(); ++c) t.Set(c, r, m.at(r, c));
  }
  return t;
}

Matrix ConcatCols(std::span<const Matrix> parts) {
  if (parts.empty()) return Matrix();
  size_t cols = 0;
  for (const Matrix& p : parts) {
    if (p.rows() != parts[0].rows()) {
      throw std::invalid_argument("ConcatCols: row mismatch");
    }
    cols += p.cols();
  }
  Matrix out(parts[0].rows(), cols, parts[0].format());
  size_t off = 0;
  for (const Matrix& p : parts) {
    PlaceTile(out, p, {0, off, p.rows(), p.cols()});
    off += p.cols();
  }
  return out;
}

Matrix SeededRandom(size_t rows, size_t cols, Format fmt, uint64_t seed,
                    double lo, double hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo <= hi)) {
    throw std::invalid_argument("SeededRandom: range must be finite");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Matrix m(rows, cols, fmt);
  for (size_t r = 0; r < rows; ++r) {
    for (size_t c = 0; c < cols; ++c) m.Set(r, c, dist(rng));
  }
  return m;
}

double MaxAbsDiff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("MaxAbsDiff: shape mismatch");
  }
  double d = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    d = std::max(d, std::fabs(a.values()[i] - b.values()[i]));
  }
  return d;
}

double MaxAbs(const Matrix& m) {
  double d = 0.0;
  for (double v : m.values()) d = std::max(d, std::fabs(v));
  return d;
}

void WriteMatrix(std::ostream& out, const Matrix& m) {
  out.write(kMagic, 4);
  PutU32(out, static_cast<uint32_t>(m.rows()));
  PutU32(out, static_cast<uint32_t>(m.cols()));
  PutU32(out, static_cast<uint32_t>(m.format()));
  for (double v : m.values()) {
    uint64_t bits = std::bit_cast<uint64_t>(v);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
  }
}

Matrix ReadMatrix(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("matrix file: bad magic");
  }
  const uint32_t rows = GetU32(in);
  const uint32_t cols = GetU32(in);
  const uint32_t code = GetU32(in);
  if (code >= kAllFormats.size()) {
    throw std::runtime_error("matrix file: bad format code");
  }
  std::vector<double> values(static_cast<size_t>(rows) * cols);
  for (double& v : values) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) {
      throw std::runtime_error("matrix file: truncated payload");
    }
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(b[i]) << (8 * i);
    v = std::bit_cast<double>(bits);
  }
  return Materialize(rows, cols, static_cast<Format>(code), values);
}

void SaveMatrix(const std::string& path, const Matrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  WriteMatrix(out, m);
}

Matrix LoadMatrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return ReadMatrix(in);
}

}  // namespace fmsim
