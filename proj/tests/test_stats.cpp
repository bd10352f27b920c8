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

#include <cmath>

#include "atc/harness.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace atc;

namespace {

CovarianceModel model_from(const std::vector<std::vector<double>>& samples) {
  CovarianceModel m(samples.front().size());
  for (const auto& s : samples) m.add(s);
  return m;
}

Matrix random_symmetric(size_t n, uint64_t seed) {
  GaussianStream g(seed);
  Matrix a(n, n);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j <= i; ++j) {
      double v = g.next();
      a(i, j) = v;
      a(j, i) = v;
    }
  return a;
}

}  // namespace

TEST_SUITE_BEGIN("stats");

TEST_CASE("accumulate: hand-checked mean and population covariance") {
  CovarianceModel m = model_from({{1, 0}, {0, 1}, {-1, 0}, {0, -1}});
  CHECK(m.mean()[0] == doctest::Approx(0.0));
  CHECK(m.mean()[1] == doctest::Approx(0.0));
  Matrix cov = m.covariance();
  CHECK(cov(0, 0) == doctest::Approx(0.5));
  CHECK(cov(1, 1) == doctest::Approx(0.5));
  CHECK(cov(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("accumulate: one sample has zero covariance") {
  CovarianceModel m = model_from({{3.0, -2.0}});
  Matrix cov = m.covariance();
  for (double v : cov.data()) CHECK(v == 0.0);
}

TEST_CASE("accumulate: dimension mismatch is rejected") {
  CovarianceModel m(2);
  std::vector<double> bad{1.0, 2.0, 3.0};
  CHECK_THROWS_AS(m.add(bad), Error);
}

TEST_CASE("accumulate converges to the sampling covariance") {
  // Monte-Carlo check against the generating Sigma.
  Matrix sigma = harness::equicorrelated(2, 0.9);
  harness::SyntheticSource src(sigma, {0.0, 0.0}, 11);
  CovarianceModel m(2);
  for (const auto& s : src.generate(100000)) m.add(s);
  Matrix cov = m.covariance();
  for (size_t i = 0; i < 2; ++i)
    for (size_t j = 0; j < 2; ++j) CHECK(std::fabs(cov(i, j) - sigma(i, j)) < 0.02);
}

TEST_CASE("merge equals joint accumulation") {
  GaussianStream g(21);
  std::vector<std::vector<double>> samples;
  for (int i = 0; i < 257; ++i) samples.push_back({g.next(), 2.0 * g.next(), g.next() - 1.0});
  CovarianceModel joint = model_from(samples);
  CovarianceModel a(3), b(3);
  for (size_t i = 0; i < samples.size(); ++i) (i % 3 ? a : b).add(samples[i]);
  a.merge(b);
  REQUIRE(a.sample_count() == joint.sample_count());
  Matrix ca = a.covariance(), cj = joint.covariance();
  for (size_t i = 0; i < ca.data().size(); ++i)
    CHECK(oracles::rel_err(ca.data()[i], cj.data()[i]) < 1e-9);
  for (size_t i = 0; i < 3; ++i) CHECK(oracles::rel_err(a.mean()[i], joint.mean()[i]) < 1e-9);
}

TEST_CASE("eigendecompose: identity preserves order and basis") {
  EigenDecomposition eig = eigendecompose(Matrix::identity(4));
  for (size_t i = 0; i < 4; ++i) {
    CHECK(eig.eigenvalues[i] == doctest::Approx(1.0));
    for (size_t j = 0; j < 4; ++j)
      CHECK(eig.eigenvectors(i, j) == doctest::Approx(i == j ? 1.0 : 0.0));
  }
}

TEST_CASE("eigendecompose: analytic 2x2") {
  Matrix s = harness::equicorrelated(2, 0.9);
  EigenDecomposition eig = eigendecompose(s);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  CHECK(eig.eigenvalues[0] == doctest::Approx(1.9));
  CHECK(eig.eigenvalues[1] == doctest::Approx(0.1));
  CHECK(eig.eigenvectors(0, 0) == doctest::Approx(inv_sqrt2));
  CHECK(eig.eigenvectors(0, 1) == doctest::Approx(inv_sqrt2));
  CHECK(eig.eigenvectors(1, 0) == doctest::Approx(inv_sqrt2));
  CHECK(eig.eigenvectors(1, 1) == doctest::Approx(-inv_sqrt2));
}

TEST_CASE("eigendecompose: reconstruction and orthonormality on random 8x8") {
  for (uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    Matrix a = random_symmetric(8, seed);
    EigenDecomposition eig = eigendecompose(a);
    const Matrix& v = eig.eigenvectors;
    // V^T diag(lambda) V must reproduce the input.
    for (size_t i = 0; i < 8; ++i)
      for (size_t j = 0; j < 8; ++j) {
        double acc = 0.0;
        for (size_t k = 0; k < 8; ++k) acc += eig.eigenvalues[k] * v(k, i) * v(k, j);
        CHECK(std::fabs(acc - a(i, j)) < 1e-9);
      }
    for (size_t i = 0; i < 8; ++i)
      for (size_t j = 0; j < 8; ++j) {
        double dot = 0.0;
        for (size_t k = 0; k < 8; ++k) dot += v(i, k) * v(j, k);
        CHECK(std::fabs(dot - (i == j ? 1.0 : 0.0)) < 1e-10);
      }
    CHECK(std::is_sorted(eig.eigenvalues.rbegin(), eig.eigenvalues.rend()));
  }
}

TEST_CASE("trace equals the eigenvalue sum") {
  Matrix a = random_symmetric(12, 77);
  // shift to PSD-ish scale; the identity holds for any symmetric input
  EigenDecomposition eig = eigendecompose(a);
  double sum = 0.0;
  for (double l : eig.eigenvalues) sum += l;
  CHECK(oracles::rel_err(sum, trace(a)) < 1e-9);
}

TEST_CASE("make_klt orders the spectrum and matches variance") {
  SUBCASE("diagonal covariance, already ordered") {
    CovarianceModel m = model_from({{2, 1}, {-2, 1}, {2, -1}, {-2, -1}});
    // population cov = diag(4, 1)
    KLTransform t = make_klt(m);
    CHECK(t.spectrum[0] == doctest::Approx(4.0));
    CHECK(t.spectrum[1] == doctest::Approx(1.0));
    CHECK(t.matrix(0, 0) == doctest::Approx(1.0));
    CHECK(t.matrix(1, 1) == doctest::Approx(1.0));
  }
  SUBCASE("correlated pair") {
    const double a = std::sqrt(1.9), b = std::sqrt(0.1);
    CovarianceModel m = model_from({{a, a}, {-a, -a}, {b, -b}, {-b, b}});
    KLTransform t = make_klt(m);
    CHECK(t.spectrum[0] == doctest::Approx(1.9));
    CHECK(t.spectrum[1] == doctest::Approx(0.1));
  }
  SUBCASE("forward-transformed sample variance approaches the spectrum") {
    Matrix sigma = harness::equicorrelated(4, 0.6);
    harness::SyntheticSource src(sigma, std::vector<double>(4, 0.0), 5);
    CovarianceModel m(4);
    auto samples = src.generate(100000);
    for (const auto& s : samples) m.add(s);
    KLTransform t = make_klt(m);
    std::vector<double> var(4, 0.0);
    for (const auto& s : samples) {
      auto y = klt_forward(t, s);
      for (size_t i = 0; i < 4; ++i) var[i] += y[i] * y[i];
    }
    for (size_t i = 0; i < 4; ++i) {
      var[i] /= static_cast<double>(samples.size());
      CHECK(oracles::rel_err(var[i], t.spectrum[i]) < 0.05);
    }
  }
}

TEST_CASE("klt forward/inverse") {
  CovarianceModel m = model_from({{1.0, 2.0, 0.5}, {-1.0, 0.0, 1.5}, {0.5, -2.0, -0.5},
                                  {2.0, 1.0, 0.0}, {-2.5, -1.0, -1.5}});
  KLTransform t = make_klt(m);

  SUBCASE("x = mean maps to zero") {
    auto y = klt_forward(t, t.mean);
    for (double v : y) CHECK(std::fabs(v) < 1e-12);
  }
  SUBCASE("round trip within 1e-5 relative") {
    GaussianStream g(31);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> x(3);
      double peak = 0.0;
      for (auto& v : x) {
        v = 10.0 * g.next();
        peak = std::max(peak, std::fabs(v));
      }
      auto back = klt_inverse(t, klt_forward(t, x));
      for (size_t i = 0; i < 3; ++i) CHECK(std::fabs(back[i] - x[i]) < 1e-5 * peak + 1e-12);
    }
  }
  SUBCASE("round trip at n=16") {
    harness::SyntheticSource src(harness::equicorrelated(16, 0.4),
                                 std::vector<double>(16, 0.0), 71);
    CovarianceModel m16(16);
    for (const auto& s : src.generate(500)) m16.add(s);
    KLTransform t16 = make_klt(m16);
    GaussianStream g(32);
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<double> x(16);
      double peak = 0.0;
      for (auto& v : x) {
        v = 5.0 * g.next();
        peak = std::max(peak, std::fabs(v));
      }
      auto back = klt_inverse(t16, klt_forward(t16, x));
      for (size_t i = 0; i < 16; ++i) CHECK(std::fabs(back[i] - x[i]) < 1e-5 * peak + 1e-12);
    }
  }
  SUBCASE("forward preserves the centered norm") {
    std::vector<double> x{0.3, -1.2, 2.2};
    auto y = klt_forward(t, x);
    double nx = 0.0, ny = 0.0;
    for (size_t i = 0; i < 3; ++i) {
      nx += (x[i] - t.mean[i]) * (x[i] - t.mean[i]);
      ny += y[i] * y[i];
    }
    CHECK(oracles::rel_err(std::sqrt(nx), std::sqrt(ny)) < 1e-6);
  }
}

TEST_CASE("identity transform passes data through") {
  CovarianceModel m = model_from({{1, 0}, {-1, 0}, {0, 1}, {0, -1}});
  KLTransform t = make_klt(m);
  // equal eigenvalues: ties keep input order, so T is the identity
  std::vector<double> x{0.25, -0.75};
  auto y = klt_forward(t, x);
  CHECK(y[0] == doctest::Approx(0.25));
  CHECK(y[1] == doctest::Approx(-0.75));
}

TEST_CASE("rank-deficient calibration still yields an orthonormal basis") {
  CovarianceModel m = model_from({{1, 2, 3, 4}, {2, 4, 6, 8}});  // rank 1
  KLTransform t = make_klt(m);
  for (size_t i = 0; i < 4; ++i)
    for (size_t j = 0; j < 4; ++j) {
      double dot = 0.0;
      for (size_t k = 0; k < 4; ++k) dot += t.matrix(i, k) * t.matrix(j, k);
      CHECK(std::fabs(dot - (i == j ? 1.0 : 0.0)) < 1e-10);
    }
}

TEST_CASE("energy_ratio") {
  std::vector<double> s1{3, 1, 0};
  CHECK(energy_ratio(s1, 0.75) == 1);
  std::vector<double> s2{1, 1, 1, 1};
  CHECK(energy_ratio(s2, 1.0) == 4);
  std::vector<double> s3{1.9, 0.1};
  CHECK(energy_ratio(s3, 0.9) == 1);  // 1.9/2.0 = 0.95 >= 0.9

  SUBCASE("nondecreasing in fraction") {
    std::vector<double> s{5, 3, 1, 0.5, 0.2};
    size_t prev = 0;
    for (double f = 0.05; f <= 1.0; f += 0.05) {
      size_t k = energy_ratio(s, std::min(f, 1.0));
      CHECK(k >= prev);
      prev = k;
    }
  }
  SUBCASE("all-zero spectrum is an error") {
    std::vector<double> z{0.0, 0.0};
    CHECK_THROWS_AS(energy_ratio(z, 0.5), Error);
  }
}

TEST_SUITE_END();
