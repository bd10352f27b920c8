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

#include "atc/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace atc {

CovarianceModel::CovarianceModel(size_t dim)
    : dim_(dim), mean_(dim, 0.0), comoment_(dim, dim) {
  if (dim == 0) throw_validation(Errc::kInvalidArgument, "covariance dimension must be positive");
}

void CovarianceModel::add(std::span<const double> sample) {
  if (dim_ == 0) *this = CovarianceModel(sample.size());
  if (sample.size() != dim_)
    throw_validation(Errc::kDimMismatch, "sample dimension " + std::to_string(sample.size()) +
                                             " does not match model dimension " +
                                             std::to_string(dim_));
  ++count_;
  const double inv_n = 1.0 / static_cast<double>(count_);
  // delta against the previous mean; the comoment update uses
  // (x - m_old)(x - m_new)^T = ((n-1)/n) * delta delta^T, which keeps the
  // accumulated matrix exactly symmetric.
  std::vector<double> delta(dim_);
  for (size_t i = 0; i < dim_; ++i) delta[i] = sample[i] - mean_[i];
  for (size_t i = 0; i < dim_; ++i) mean_[i] += delta[i] * inv_n;
  const double w = static_cast<double>(count_ - 1) * inv_n;
  for (size_t i = 0; i < dim_; ++i) {
    const double di = delta[i] * w;
    for (size_t j = i; j < dim_; ++j) {
      double v = comoment_(i, j) + di * delta[j];
      comoment_(i, j) = v;
      comoment_(j, i) = v;
    }
  }
}

void CovarianceModel::add_all(std::span<const std::vector<double>> samples) {
  for (const auto& s : samples) add(s);
}

void CovarianceModel::merge(const CovarianceModel& other) {
  if (other.count_ == 0) return;
  if (count_ == 0) {
    *this = other;
    return;
  }
  if (other.dim_ != dim_)
    throw_validation(Errc::kDimMismatch, "cannot merge models of different dimension");
  const double na = static_cast<double>(count_);
  const double nb = static_cast<double>(other.count_);
  const double nt = na + nb;
  std::vector<double> delta(dim_);
  for (size_t i = 0; i < dim_; ++i) delta[i] = other.mean_[i] - mean_[i];
  for (size_t i = 0; i < dim_; ++i) mean_[i] += delta[i] * (nb / nt);
  const double w = na * nb / nt;
  for (size_t i = 0; i < dim_; ++i)
    for (size_t j = 0; j < dim_; ++j)
      comoment_(i, j) += other.comoment_(i, j) + w * delta[i] * delta[j];
  count_ += other.count_;
}

Matrix CovarianceModel::covariance() const {
  if (dim_ == 0) throw_validation(Errc::kInvalidArgument, "empty covariance model");
  Matrix cov(dim_, dim_);
  if (count_ == 0) return cov;
  const double inv_n = 1.0 / static_cast<double>(count_);
  for (size_t i = 0; i < dim_; ++i)
    for (size_t j = 0; j < dim_; ++j) cov(i, j) = comoment_(i, j) * inv_n;
  return cov;
}

namespace {

// One Jacobi rotation zeroing a(p,q); accumulates the rotation into v
// (columns of v converge to eigenvectors).
void jacobi_rotate(Matrix& a, Matrix& v, size_t p, size_t q) {
  const size_t n = a.rows();
  const double apq = a(p, q);
  if (apq == 0.0) return;
  const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
  double t;
  if (std::fabs(theta) > 1e150) {
    t = 1.0 / (2.0 * theta);
  } else {
    t = 1.0 / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
    if (theta < 0.0) t = -t;
  }
  const double c = 1.0 / std::sqrt(t * t + 1.0);
  const double s = t * c;
  const double tau = s / (1.0 + c);

  a(p, p) -= t * apq;
  a(q, q) += t * apq;
  a(p, q) = 0.0;
  a(q, p) = 0.0;
  for (size_t i = 0; i < n; ++i) {
    if (i != p && i != q) {
      const double aip = a(i, p);
      const double aiq = a(i, q);
      a(i, p) = aip - s * (aiq + tau * aip);
      a(p, i) = a(i, p);
      a(i, q) = aiq + s * (aip - tau * aiq);
      a(q, i) = a(i, q);
    }
    const double vip = v(i, p);
    const double viq = v(i, q);
    v(i, p) = vip - s * (viq + tau * vip);
    v(i, q) = viq + s * (vip - tau * viq);
  }
}

}  // namespace

EigenDecomposition eigendecompose(const Matrix& symmetric) {
  if (symmetric.rows() != symmetric.cols() || symmetric.rows() == 0)
    throw_validation(Errc::kDimMismatch, "eigendecompose requires a square matrix");
  const size_t n = symmetric.rows();
  Matrix a = symmetric;
  Matrix v = Matrix::identity(n);
  const double fro = frobenius_norm(a);
  const double threshold = 1e-12 * fro;

  bool converged = fro == 0.0;
  for (int sweep = 0; sweep < 100 && !converged; ++sweep) {
    if (max_abs_offdiag(a) < threshold) {
      converged = true;
      break;
    }
    for (size_t p = 0; p + 1 < n; ++p)
      for (size_t q = p + 1; q < n; ++q)
        if (std::fabs(a(p, q)) > threshold * 1e-2) jacobi_rotate(a, v, p, q);
  }
  if (!converged && max_abs_offdiag(a) >= threshold)
    throw_numeric(Errc::kNonConvergence,
                  "jacobi did not converge in 100 sweeps; residual " +
                      std::to_string(max_abs_offdiag(a)));

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t i, size_t j) { return a(i, i) > a(j, j); });

  EigenDecomposition out;
  out.eigenvalues.resize(n);
  out.eigenvectors = Matrix(n, n);
  double max_abs_lambda = 0.0;
  for (size_t i = 0; i < n; ++i) max_abs_lambda = std::max(max_abs_lambda, std::fabs(a(i, i)));
  for (size_t i = 0; i < n; ++i) {
    const size_t src = order[i];
    double lambda = a(src, src);
    if (lambda < 0.0 && lambda >= -1e-9 * max_abs_lambda) lambda = 0.0;
    out.eigenvalues[i] = lambda;
    // column src of v is the eigenvector; store as row i
    double peak = 0.0;
    size_t peak_idx = 0;
    for (size_t r = 0; r < n; ++r) {
      const double mag = std::fabs(v(r, src));
      if (mag > peak) {
        peak = mag;
        peak_idx = r;
      }
    }
    const double sign = v(peak_idx, src) < 0.0 ? -1.0 : 1.0;
    for (size_t r = 0; r < n; ++r) out.eigenvectors(i, r) = sign * v(r, src);
  }
  return out;
}

KLTransform make_klt(const CovarianceModel& model) {
  Matrix cov = model.covariance();
  const size_t n = cov.rows();
  const double bump = 1e-8 * trace(cov) / static_cast<double>(n);
  for (size_t i = 0; i < n; ++i) cov(i, i) += bump;
  EigenDecomposition eig = eigendecompose(cov);
  return KLTransform{std::move(eig.eigenvectors), model.mean(), std::move(eig.eigenvalues)};
}

std::vector<double> klt_forward(const KLTransform& t, std::span<const double> x) {
  if (x.size() != t.dim())
    throw_validation(Errc::kDimMismatch, "klt_forward dimension mismatch");
  std::vector<double> centered(x.size());
  for (size_t i = 0; i < x.size(); ++i) centered[i] = x[i] - t.mean[i];
  return matvec(t.matrix, centered);
}

std::vector<double> klt_inverse(const KLTransform& t, std::span<const double> y) {
  if (y.size() != t.dim())
    throw_validation(Errc::kDimMismatch, "klt_inverse dimension mismatch");
  std::vector<double> x = matvec_transposed(t.matrix, y);
  for (size_t i = 0; i < x.size(); ++i) x[i] += t.mean[i];
  return x;
}

size_t energy_ratio(std::span<const double> spectrum, double fraction) {
  if (spectrum.empty())
    throw_validation(Errc::kInvalidArgument, "energy_ratio: empty spectrum");
  if (!(fraction > 0.0) || fraction > 1.0)
    throw_validation(Errc::kInvalidArgument, "energy_ratio: fraction must be in (0, 1]");
  double total = 0.0;
  for (double v : spectrum) {
    if (v < 0.0) throw_validation(Errc::kInvalidArgument, "energy_ratio: negative eigenvalue");
    total += v;
  }
  if (total <= 0.0) throw_numeric(Errc::kAllZero, "energy_ratio: all-zero spectrum");
  double cum = 0.0;
  for (size_t k = 0; k < spectrum.size(); ++k) {
    cum += spectrum[k];
    if (cum / total >= fraction - 1e-15) return k + 1;
  }
  return spectrum.size();
}

}  // namespace atc
