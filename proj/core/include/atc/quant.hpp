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

// Uniform scalar quantization, the step-vs-rate laws for Gaussian inputs,
// optimal rate allocation across components, and distortion prediction.

#ifndef ATC_QUANT_HPP
#define ATC_QUANT_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "atc/common.hpp"

namespace atc {

inline constexpr double kPiE6 = 1.4232890371122610;  // pi*e/6
// Empirical constant of the high-rate step law: step ~= 4.2184 * 2^-R.
inline constexpr double kStepLawConstant = 4.2184;

// Mid-tread uniform quantizer: reconstruction levels are k*step, inputs are
// clamped to [-clip, clip] before rounding.
struct QuantizerSpec {
  double step = 1.0;
  double clip = 0.5;

  int32_t max_bin() const { return static_cast<int32_t>(clip / step); }
  int64_t level_count() const { return 2 * static_cast<int64_t>(max_bin()) + 1; }
};

QuantizerSpec make_quantizer(double step, double clip);

// k = round(clamp(x, +-clip) / step), half away from zero; |k| <= clip/step.
std::vector<int32_t> quantize(std::span<const double> x, const QuantizerSpec& spec);
int32_t quantize_one(double x, const QuantizerSpec& spec);

std::vector<double> dequantize(std::span<const int32_t> bins, const QuantizerSpec& spec);
inline double dequantize_one(int32_t bin, const QuantizerSpec& spec) {
  return bin * spec.step;
}

// High-rate approximation of the step achieving R bits on a unit-variance
// Gaussian. Accurate for R >= 2 bits.
double step_for_rate_approx(double rate_bits);

// Numerically exact step: bisection until the entropy of the mid-tread bin
// distribution of N(0, sigma^2) matches the target rate within 1e-4 bits.
// Scale-equivariant: step(R, sigma) == sigma * step(R, 1) exactly.
double step_for_rate_exact(double rate_bits, double sigma);

// Entropy (bits) of the mid-tread bin distribution of N(0, sigma^2) at the
// given step; bin probabilities from the Gaussian CDF, tails truncated below
// 1e-12 total mass.
double gaussian_bin_entropy(double step, double sigma);

enum class AllocationMode {
  kPaperClamp,  // closed form, negative rates clamped to zero (budget may overshoot)
  kWaterfill,   // active-set re-solve keeping mean(rates) == target over all n
};

struct RateAllocation {
  std::vector<double> rates;        // bits per sample, all >= 0
  double target = 0.0;              // requested average rate
  std::vector<size_t> active_set;   // indices with rates > 0
};

// Distributes an average budget of `target_bits` per component across
// components with the given variances so the predicted total distortion is
// minimized. Zero-variance components always receive rate 0.
RateAllocation allocate_rates(std::span<const double> variances, double target_bits,
                              AllocationMode mode);

struct DistortionPrediction {
  std::vector<double> per_index;  // (pi*e/6) * sigma_i^2 * 2^(-2 R_i)
  double total = 0.0;             // mean over components
};

DistortionPrediction predict_distortion(std::span<const double> variances,
                                        std::span<const double> rates);

// Closed-form minimum distortion at average rate R under optimal allocation:
// (pi*e/6) * geomean(variances) * 2^(-2R).
double optimal_distortion(std::span<const double> variances, double rate_bits);

}  // namespace atc

#endif  // ATC_QUANT_HPP
