// base/matrix.h

// Copyright 2026  The cllab authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef CLLAB_BASE_MATRIX_H_
#define CLLAB_BASE_MATRIX_H_

#include <vector>

#include "base/common.h"

namespace cllab {

// Dense row-major matrix of doubles.  All score grids in this codebase
// (emissions, occupancies, features) use this type; the semantics live in the
// function signatures.
class Matrix {
 public:
  Matrix() : num_rows_(0), num_cols_(0) {}
  Matrix(int32 num_rows, int32 num_cols, double fill = 0.0)
      : num_rows_(num_rows),
        num_cols_(num_cols),
        data_(static_cast<size_t>(num_rows) * num_cols, fill) {
    if (num_rows < 0 || num_cols < 0)
      throw InvalidInputError("negative matrix dimension");
  }

  int32 NumRows() const { return num_rows_; }
  int32 NumCols() const { return num_cols_; }

  double &operator()(int32 r, int32 c) {
    return data_[static_cast<size_t>(r) * num_cols_ + c];
  }
  double operator()(int32 r, int32 c) const {
    return data_[static_cast<size_t>(r) * num_cols_ + c];
  }

  double *RowData(int32 r) {
    return data_.data() + static_cast<size_t>(r) * num_cols_;
  }
  const double *RowData(int32 r) const {
    return data_.data() + static_cast<size_t>(r) * num_cols_;
  }

  std::vector<double> &Data() { return data_; }
  const std::vector<double> &Data() const { return data_; }

  bool SameDim(const Matrix &other) const {
    return num_rows_ == other.num_rows_ && num_cols_ == other.num_cols_;
  }

  bool AllFinite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const Matrix &a, const Matrix &b) {
    return a.num_rows_ == b.num_rows_ && a.num_cols_ == b.num_cols_ &&
           a.data_ == b.data_;
  }

 private:
  int32 num_rows_;
  int32 num_cols_;
  std::vector<double> data_;
};

// Per-frame network log-scores, one row per frame, one column per label.
using EmissionMatrix = Matrix;
// Per-frame per-label posteriors from forward-backward; rows sum to 1.
using OccupancyMatrix = Matrix;

}  // namespace cllab

#endif  // CLLAB_BASE_MATRIX_H_
