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

#include "atc/linalg.hpp"

#include <cmath>
#include <string>

namespace atc {

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (size_t r = 0; r < rows_; ++r)
    for (size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw_validation(Errc::kDimMismatch, "matmul dimension mismatch");
  Matrix out(a.rows(), b.cols());
  for (size_t i = 0; i < a.rows(); ++i) {
    for (size_t k = 0; k < a.cols(); ++k) {
      double aik = a(i, k);
      if (aik == 0.0) continue;
      for (size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  }
  return out;
}

std::vector<double> matvec(const Matrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) throw_validation(Errc::kDimMismatch, "matvec dimension mismatch");
  std::vector<double> y(a.rows(), 0.0);
  for (size_t i = 0; i < a.rows(); ++i) {
    double acc = 0.0;
    auto row = a.row(i);
    for (size_t j = 0; j < row.size(); ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
  return y;
}

std::vector<double> matvec_transposed(const Matrix& a, std::span<const double> x) {
  if (a.rows() != x.size()) throw_validation(Errc::kDimMismatch, "matvec dimension mismatch");
  std::vector<double> y(a.cols(), 0.0);
  for (size_t i = 0; i < a.rows(); ++i) {
    double xi = x[i];
    if (xi == 0.0) continue;
    auto row = a.row(i);
    for (size_t j = 0; j < row.size(); ++j) y[j] += row[j] * xi;
  }
  return y;
}

double trace(const Matrix& a) {
  double t = 0.0;
  for (size_t i = 0; i < a.rows() && i < a.cols(); ++i) t += a(i, i);
  return t;
}

double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return std::sqrt(s);
}

double max_abs_offdiag(const Matrix& a) {
  double m = 0.0;
  for (size_t i = 0; i < a.rows(); ++i)
    for (size_t j = 0; j < a.cols(); ++j)
      if (i != j) m = std::max(m, std::fabs(a(i, j)));
  return m;
}

double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double v : a.data()) m = std::max(m, std::fabs(v));
  return m;
}

namespace {

bool try_cholesky(const Matrix& a, Matrix& l) {
  const size_t n = a.rows();
  l = Matrix(n, n);
  for (size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (d <= 0.0 || !std::isfinite(d)) return false;
    l(j, j) = std::sqrt(d);
    for (size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  return true;
}

}  // namespace

Matrix cholesky(const Matrix& a) {
  if (a.rows() != a.cols() || a.rows() == 0)
    throw_validation(Errc::kDimMismatch, "cholesky requires a square matrix");
  const size_t n = a.rows();
  Matrix l;
  if (try_cholesky(a, l)) return l;
  double tr = trace(a);
  if (!(tr > 0.0)) throw_numeric(Errc::kCholeskyFailure, "cholesky: non-positive trace");
  for (double eps : {1e-12, 1e-10, 1e-8}) {
    Matrix jittered = a;
    double bump = eps * tr / static_cast<double>(n);
    for (size_t i = 0; i < n; ++i) jittered(i, i) += bump;
    if (try_cholesky(jittered, l)) return l;
  }
  throw_numeric(Errc::kCholeskyFailure, "cholesky failed after jitter of 1e-8*trace/n");
}

}  // namespace atc
