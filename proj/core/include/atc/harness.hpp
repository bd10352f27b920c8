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

// Experiment harness: seeded correlated-Gaussian sources, a small
// conv/BN/ReLU layer chain, rate-distortion sweeps, ablation and block-shape
// studies, coding-gain prediction, and CSV/JSON report emission.

#ifndef ATC_HARNESS_HPP
#define ATC_HARNESS_HPP

#include <optional>
#include <string>
#include <vector>

#include "atc/codec.hpp"
#include "atc/random.hpp"

namespace atc::harness {

// ---------------------------------------------------------------------------
// Synthetic sources
// ---------------------------------------------------------------------------

// x = mu + L z with L the Cholesky factor of Sigma and z i.i.d. standard
// normal from the pinned counter-based generator. Identical seeds give
// identical sample streams.
class SyntheticSource {
 public:
  SyntheticSource(Matrix sigma, std::vector<double> mu, uint64_t seed);

  std::vector<std::vector<double>> generate(size_t count);
  // Tensor whose partition under `shape` yields i.i.d. source samples;
  // dimensions must be multiples of the block extents.
  ActivationTensor tensor(uint32_t height, uint32_t width, uint32_t channels,
                          const BlockShape& shape);
  std::vector<ActivationTensor> tensors(size_t count, uint32_t height, uint32_t width,
                                        uint32_t channels, const BlockShape& shape);

  size_t dim() const { return mu_.size(); }
  const Matrix& sigma() const { return sigma_; }
  uint64_t seed() const { return seed_; }
  SyntheticSource clone_with_seed(uint64_t salt) const;

 private:
  Matrix sigma_;
  std::vector<double> mu_;
  uint64_t seed_;
  Matrix chol_;
  GaussianStream stream_;
};

Matrix equicorrelated(size_t n, double rho, double variance = 1.0);
Matrix diagonal_matrix(std::span<const double> variances);
// Sigma = Q diag(spectrum) Q^T with a seeded random orthonormal basis.
Matrix rotated_spectrum(std::span<const double> spectrum, uint64_t seed);

// Separable patch source: cov(X[p,c], X[p',c']) = spatial(p,p') * channel(c,c')
// with p indexing patch pixels row-major. Each generated tensor is one patch.
class KroneckerSource {
 public:
  KroneckerSource(uint32_t patch_h, uint32_t patch_w, Matrix spatial_cov, Matrix channel_cov,
                  uint64_t seed);

  ActivationTensor tensor();
  std::vector<ActivationTensor> tensors(size_t count);

 private:
  uint32_t patch_h_, patch_w_;
  Matrix spatial_chol_, channel_chol_;
  GaussianStream stream_;
};

// ---------------------------------------------------------------------------
// Layer chain
// ---------------------------------------------------------------------------

enum class LayerKind { kConv, kIdentity };

struct ChainLayerSpec {
  LayerKind kind = LayerKind::kConv;
  uint32_t kernel = 3;
  uint32_t out_channels = 0;
  uint32_t stride = 1;
  std::optional<std::string> weights_file;  // ATCT kernels (out, in, kh, kw)
  std::optional<BnParams> bn;               // identity when absent
  LayerCodecConfig codec;
};

struct LayerChainSpec {
  uint32_t input_h = 0, input_w = 0, input_c = 0;
  uint64_t weight_seed = 1;
  std::vector<ChainLayerSpec> layers;

  void validate() const;
};

LayerChainSpec load_chain_spec(const std::string& path);
LayerChainSpec chain_spec_from_json(const std::string& json_text);
std::string chain_spec_to_json(const LayerChainSpec& spec);

// Parses a single codec-config JSON object (the "codec" block of a chain
// spec); used by tools that assemble sweep configurations.
LayerCodecConfig codec_config_from_json(const std::string& json_text);

// Materializes calibration/evaluation tensors from a source-spec JSON
// document ("synthetic", "kronecker", or "tensor-files"); see README for the
// schema. A seed override replaces the spec's seed when present.
std::vector<ActivationTensor> tensors_from_source_json(const std::string& json_text,
                                                       std::optional<uint64_t> seed_override);

// Per-layer weights: seeded He-scale init (std = sqrt(2 / fan_in), stream
// seed derived from weight_seed and the layer index) or the referenced
// weight file. Identity layers get no weights.
std::vector<ConvWeights> chain_weights(const LayerChainSpec& spec);

// Direct convolution with zero padding of kernel/2 on each side.
ActivationTensor conv2d(const ActivationTensor& input, const ConvWeights& w, uint32_t stride);
ActivationTensor bn_apply(const ActivationTensor& input, const BnParams& bn);

struct ChainCalibration {
  CalibrationProfile profile;
  std::vector<Matrix> covariances;  // per-layer block covariance at calibration
};

// Layer-by-layer calibration. When `progressive` is set (the default), each
// layer's statistics are gathered on batches that already passed through the
// quantized earlier layers, i.e. on decoded outputs; otherwise on the clean
// forward pass.
ChainCalibration calibrate_chain(const LayerChainSpec& spec,
                                 std::span<const ActivationTensor> batch,
                                 bool progressive = true,
                                 const std::string& model_id = "chain");

struct RateDistortionPoint {
  int64_t layer = 0;
  double step = 0.0;
  double entropy_bits = 0.0;   // bits/value from the produced symbol histogram
  double huffman_bits = 0.0;   // measured payload bits/value
  double header_bits = 0.0;    // container header bits/value
  double mse = 0.0;            // vs the uncompressed reference
  std::optional<double> output_mse;  // chain-final divergence, when applicable

  bool operator==(const RateDistortionPoint& other) const = default;
};

struct ChainRunResult {
  ActivationTensor output;
  std::vector<RateDistortionPoint> layers;
  double output_mse = 0.0;  // decoded chain output vs uncompressed chain output
};

// Executes conv -> BN -> encode -> decode -> ReLU per layer (optionally via
// folded weights) and reports per-layer rates plus final-output divergence.
ChainRunResult run_chain(const LayerChainSpec& spec, const ActivationTensor& input,
                         const CalibrationProfile& profile, bool folded = false);

// ---------------------------------------------------------------------------
// Sweeps and studies
// ---------------------------------------------------------------------------

// One point per grid value: the base config with the quantizer selector
// replaced by the grid value (explicit step, or target rate when
// `grid_is_rates`). Calibration and measurement use the same data. Points
// are emitted in grid order; jobs run on up to `threads` workers.
std::vector<RateDistortionPoint> rd_sweep(std::span<const ActivationTensor> data,
                                          const LayerCodecConfig& base,
                                          std::span<const double> grid, bool grid_is_rates,
                                          int threads = 1);

// Chain sweep: one calibration + run per grid rate, one point per layer.
std::vector<RateDistortionPoint> rd_sweep_chain(const LayerChainSpec& spec,
                                                std::span<const ActivationTensor> batch,
                                                std::span<const double> rates,
                                                bool progressive = true);

// Rate saving (bits/sample) at equal distortion promised by decorrelation:
// (1/2n) log2(prod variances / det Sigma). +infinity for singular Sigma.
double coding_gain_bits(const Matrix& sigma);

// Mean per-component symbol entropy in bits/value: each block position gets
// its own histogram, matching the per-component accounting of the rate
// allocation theory. (The pooled per-layer rate of an actual codebook is
// higher by the symbol/channel mutual information, which matters at small n.)
double component_entropy_bits(std::span<const ActivationTensor> data,
                              const ProfileEntry& entry);

// Interpolated Huffman rate of a sweep at a target MSE (linear in log-MSE).
double rate_at_mse(std::span<const RateDistortionPoint> points, double target_mse);

struct ShapeStudyResult {
  BlockShape shape;
  std::vector<RateDistortionPoint> points;
};

// Same data, same step grid, one sweep per shape; shapes must share n.
std::vector<ShapeStudyResult> block_shape_study(std::span<const ActivationTensor> data,
                                                std::span<const BlockShape> shapes,
                                                const LayerCodecConfig& base,
                                                std::span<const double> steps, int threads = 1);

struct EnergyRatioRow {
  size_t layer = 0;
  double fraction = 0.0;
  size_t count = 0;    // eigenvalues needed to reach the fraction
  double ratio = 0.0;  // count / n
};

inline constexpr double kEnergyFractions[] = {0.80, 0.90, 0.95, 0.99};

std::vector<EnergyRatioRow> energy_ratio_report(const CalibrationProfile& profile);

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

// CSV columns: layer,step,entropy_bits,huffman_bits,header_bits,mse,output_mse
// (output_mse empty when absent). JSON mirrors the same fields. Doubles are
// printed with 17 significant digits so parsing reproduces them exactly.
std::string report_to_csv(std::span<const RateDistortionPoint> points);
std::string report_to_json(std::span<const RateDistortionPoint> points);
std::vector<RateDistortionPoint> parse_report_csv(const std::string& text);
std::vector<RateDistortionPoint> parse_report_json(const std::string& text);
void emit_report(std::span<const RateDistortionPoint> points, const std::string& format,
                 const std::string& path);

double tensor_mse(const ActivationTensor& a, const ActivationTensor& b);

}  // namespace atc::harness

#endif  // ATC_HARNESS_HPP
