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

// Streaming mean/covariance estimation, symmetric eigendecomposition, and
// the decorrelating transform built from them.

#ifndef ATC_STATS_HPP
#define ATC_STATS_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "atc/linalg.hpp"

namespace atc {

// Single-pass mean and comoment accumulator (population convention: the
// covariance divides by N, not N-1). Accumulation is single-writer; models
// accumulated independently can be merged and match a joint accumulation.
class CovarianceModel {
 public:
  CovarianceModel() = default;
  explicit CovarianceModel(size_t dim);

  void add(std::span<const double> sample);
  void add_all(std::span<const std::vector<double>> samples);
  void merge(const CovarianceModel& other);

  size_t dim() const { return dim_; }
  uint64_t sample_count() const { return count_; }
  const std::vector<double>& mean() const { return mean_; }

  // Population covariance comoment / N. All zeros until two samples arrive.
  Matrix covariance() const;

 private:
  size_t dim_ = 0;
  uint64_t count_ = 0;
  std::vector<double> mean_;
  Matrix comoment_;
};

struct EigenDecomposition {
  std::vector<double> eigenvalues;  // sorted descending
  Matrix eigenvectors;              // row i pairs with eigenvalue i; rows orthonormal
};

// Cyclic Jacobi rotations on a symmetric matrix until the largest
// off-diagonal entry falls below 1e-12 * ||A||_F (at most 100 sweeps;
// non-convergence raises with the residual). Eigenvalues are sorted
// descending with a stable tie-break preserving input order; tiny negative
// values within 1e-9 * max|lambda| are clamped to zero. Sign convention:
// the first component of largest magnitude in each eigenvector is positive.
EigenDecomposition eigendecompose(const Matrix& symmetric);

struct KLTransform {
  Matrix matrix;                 // rows = principal directions, descending variance
  std::vector<double> mean;
  std::vector<double> spectrum;  // transform-domain variances, descending

  size_t dim() const { return mean.size(); }
  bool operator==(const KLTransform& other) const = default;
};

// Builds the decorrelating transform for a model. The covariance diagonal is
// regularized with 1e-8 * trace / n before decomposition so rank-deficient
// calibration sets still produce a full orthonormal basis.
KLTransform make_klt(const CovarianceModel& model);

std::vector<double> klt_forward(const KLTransform& t, std::span<const double> x);
std::vector<double> klt_inverse(const KLTransform& t, std::span<const double> y);

// Smallest k such that the top-k eigenvalues hold at least `fraction` of the
// total energy. fraction in (0, 1]; spectrum nonnegative with positive sum.
size_t energy_ratio(std::span<const double> spectrum, double fraction);

}  // namespace atc

#endif  // ATC_STATS_HPP
