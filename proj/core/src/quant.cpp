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

#include "atc/quant.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace atc {

namespace {

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x * 0.70710678118654752440); }

double log2_safe(double x) { return std::log2(x); }

}  // namespace

QuantizerSpec make_quantizer(double step, double clip) {
  if (!(step > 0.0)) throw_validation(Errc::kInvalidArgument, "quantizer step must be positive");
  if (!(clip >= step / 2.0))
    throw_validation(Errc::kInvalidArgument, "quantizer clip must be at least step/2");
  return QuantizerSpec{step, clip};
}

int32_t quantize_one(double x, const QuantizerSpec& spec) {
  const double clamped = std::clamp(x, -spec.clip, spec.clip);
  // std::round rounds halves away from zero
  double k = std::round(clamped / spec.step);
  const double kmax = static_cast<double>(spec.max_bin());
  k = std::clamp(k, -kmax, kmax);
  return static_cast<int32_t>(k);
}

std::vector<int32_t> quantize(std::span<const double> x, const QuantizerSpec& spec) {
  std::vector<int32_t> bins(x.size());
  for (size_t i = 0; i < x.size(); ++i) bins[i] = quantize_one(x[i], spec);
  return bins;
}

std::vector<double> dequantize(std::span<const int32_t> bins, const QuantizerSpec& spec) {
  std::vector<double> out(bins.size());
  for (size_t i = 0; i < bins.size(); ++i) out[i] = bins[i] * spec.step;
  return out;
}

double step_for_rate_approx(double rate_bits) {
  if (rate_bits < 0.0)
    throw_validation(Errc::kInvalidArgument, "rate must be nonnegative");
  return kStepLawConstant * std::exp2(-rate_bits);
}

double gaussian_bin_entropy(double step, double sigma) {
  if (!(step > 0.0) || !(sigma > 0.0))
    throw_validation(Errc::kInvalidArgument, "step and sigma must be positive");
  const double s = step / sigma;  // entropy depends only on the ratio
  // p_0, then symmetric pairs outward until the remaining tail mass is
  // below 1e-12.
  double entropy = 0.0;
  const double p0 = std_normal_cdf(0.5 * s) - std_normal_cdf(-0.5 * s);
  if (p0 > 0.0) entropy -= p0 * log2_safe(p0);
  for (int64_t k = 1;; ++k) {
    const double hi = std_normal_cdf((k + 0.5) * s);
    const double lo = std_normal_cdf((k - 0.5) * s);
    const double pk = hi - lo;
    if (pk > 0.0) entropy -= 2.0 * pk * log2_safe(pk);
    const double tail = 2.0 * (1.0 - std_normal_cdf((k + 0.5) * s));
    if (tail < 1e-12) break;
    if (k > 100000000)
      throw_numeric(Errc::kNonConvergence, "gaussian_bin_entropy: tail did not close");
  }
  return entropy;
}

double step_for_rate_exact(double rate_bits, double sigma) {
  if (!(rate_bits > 0.0))
    throw_validation(Errc::kInvalidArgument, "rate must be positive");
  if (!(sigma > 0.0)) throw_validation(Errc::kInvalidArgument, "sigma must be positive");

  if (rate_bits > 24.0)
    throw_numeric(Errc::kNonBracketing,
                  "rate " + std::to_string(rate_bits) + " outside the solver window (<= 24 bits)");

  // Solve for sigma = 1, then scale: the bin distribution depends only on
  // step/sigma, so step(R, sigma) = sigma * step(R, 1) exactly.
  double hi = 1.0;
  while (gaussian_bin_entropy(hi, 1.0) > rate_bits) {
    hi *= 2.0;
    if (hi > 1e9)
      throw_numeric(Errc::kNonBracketing, "rate too small for the solver window");
  }
  double lo = hi;
  while (gaussian_bin_entropy(lo, 1.0) < rate_bits) {
    lo *= 0.5;
    if (lo < 1e-12)
      throw_numeric(Errc::kNonBracketing, "rate too large for the solver window");
  }

  double mid = 0.5 * (lo + hi);
  for (int iter = 0; iter < 200; ++iter) {
    mid = 0.5 * (lo + hi);
    const double h = gaussian_bin_entropy(mid, 1.0);
    if (std::fabs(h - rate_bits) <= 0.5e-4) break;
    if (h > rate_bits)
      lo = mid;  // entropy too high -> coarsen
    else
      hi = mid;
  }
  if (std::fabs(gaussian_bin_entropy(mid, 1.0) - rate_bits) > 1e-4)
    throw_numeric(Errc::kNonConvergence, "step_for_rate_exact: bisection stalled");
  return sigma * mid;
}

RateAllocation allocate_rates(std::span<const double> variances, double target_bits,
                              AllocationMode mode) {
  const size_t n = variances.size();
  if (n == 0) throw_validation(Errc::kInvalidArgument, "allocate_rates: empty variance vector");
  if (target_bits < 0.0)
    throw_validation(Errc::kInvalidArgument, "allocate_rates: negative target rate");
  size_t positive = 0;
  for (double v : variances) {
    if (v < 0.0) throw_validation(Errc::kInvalidArgument, "allocate_rates: negative variance");
    if (v > 0.0) ++positive;
  }
  if (positive == 0) throw_numeric(Errc::kAllZero, "allocate_rates: all variances are zero");

  RateAllocation out;
  out.target = target_bits;
  out.rates.assign(n, 0.0);

  // log2 sigma_i = 0.5 * log2 variance_i
  std::vector<double> log_sigma(n, 0.0);
  for (size_t i = 0; i < n; ++i)
    if (variances[i] > 0.0) log_sigma[i] = 0.5 * log2_safe(variances[i]);

  if (mode == AllocationMode::kPaperClamp) {
    // Closed form over the positive-variance components; zero-variance
    // entries are excluded from the log mean and pinned at rate 0.
    double mean_log = 0.0;
    for (size_t i = 0; i < n; ++i)
      if (variances[i] > 0.0) mean_log += log_sigma[i];
    mean_log /= static_cast<double>(positive);
    for (size_t i = 0; i < n; ++i) {
      if (variances[i] <= 0.0) continue;
      const double r = target_bits + log_sigma[i] - mean_log;
      out.rates[i] = r > 0.0 ? r : 0.0;
    }
  } else {
    // Reverse water-filling: solve the closed form on the active set with the
    // full budget n * target, drop components that come out negative, repeat.
    std::vector<size_t> active;
    for (size_t i = 0; i < n; ++i)
      if (variances[i] > 0.0) active.push_back(i);
    const double total_budget = target_bits * static_cast<double>(n);

    while (!active.empty()) {
      const double m = static_cast<double>(active.size());
      double mean_log = 0.0;
      for (size_t i : active) mean_log += log_sigma[i];
      mean_log /= m;

      bool all_nonnegative = true;
      std::vector<size_t> next;
      next.reserve(active.size());
      for (size_t i : active) {
        const double r = total_budget / m + log_sigma[i] - mean_log;
        if (r < 0.0) {
          all_nonnegative = false;
        } else {
          next.push_back(i);
        }
      }
      if (all_nonnegative) {
        for (size_t i : active)
          out.rates[i] = total_budget / m + log_sigma[i] - mean_log;
        break;
      }
      if (next.empty()) break;  // target 0 or vanishing budget: everyone at 0
      active = std::move(next);
    }
  }

  for (size_t i = 0; i < n; ++i)
    if (out.rates[i] > 0.0) out.active_set.push_back(i);
  return out;
}

DistortionPrediction predict_distortion(std::span<const double> variances,
                                        std::span<const double> rates) {
  if (variances.size() != rates.size())
    throw_validation(Errc::kDimMismatch, "predict_distortion: length mismatch");
  DistortionPrediction out;
  out.per_index.resize(variances.size());
  for (size_t i = 0; i < variances.size(); ++i) {
    out.per_index[i] = kPiE6 * variances[i] * std::exp2(-2.0 * rates[i]);
    out.total += out.per_index[i];
  }
  if (!variances.empty()) out.total /= static_cast<double>(variances.size());
  return out;
}

double optimal_distortion(std::span<const double> variances, double rate_bits) {
  if (variances.empty())
    throw_validation(Errc::kInvalidArgument, "optimal_distortion: empty variances");
  double log_sum = 0.0;
  for (double v : variances) {
    if (v < 0.0) throw_validation(Errc::kInvalidArgument, "optimal_distortion: negative variance");
    if (v == 0.0) return 0.0;  // geometric mean collapses
    log_sum += std::log(v);
  }
  const double geomean = std::exp(log_sum / static_cast<double>(variances.size()));
  return kPiE6 * geomean * std::exp2(-2.0 * rate_bits);
}

}  // namespace atc
