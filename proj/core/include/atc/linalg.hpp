// Copyright 2026 the atc authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Dense row-major double matrices, sized for per-layer channel counts
// (n <= 512), plus the handful of factorizations the codec needs.

#ifndef ATC_LINALG_HPP
#define ATC_LINALG_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "atc/common.hpp"

namespace atc {

class Matrix {
 public:
  Matrix() = default;
  Matrix(size_t rows, size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  static Matrix identity(size_t n) {
    Matrix m(n, n);
    for (size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  double& operator()(size_t r, size_t c) { return data_[r * cols_ + c]; }
  double operator()(size_t r, size_t c) const { return data_[r * cols_ + c]; }

  size_t rows() const { return rows_; }
  size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  std::span<const double> row(size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> row(size_t r) { return {data_.data() + r * cols_, cols_}; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  Matrix transposed() const;

  bool operator==(const Matrix& other) const = default;

 private:
  size_t rows_ = 0;
  size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
std::vector<double> matvec(const Matrix& a, std::span<const double> x);
// y = A^T x without forming the transpose.
std::vector<double> matvec_transposed(const Matrix& a, std::span<const double> x);

double trace(const Matrix& a);
double frobenius_norm(const Matrix& a);
double max_abs_offdiag(const Matrix& a);
double max_abs(const Matrix& a);

// Lower-triangular Cholesky factor of a PSD matrix. Retries with a small
// relative diagonal jitter before giving up, so rank-deficient covariances
// (e.g. rank-1 synthetic sources) still factor.
Matrix cholesky(const Matrix& a);

}  // namespace atc

#endif  // ATC_LINALG_HPP
