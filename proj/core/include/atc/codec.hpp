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

// Per-layer encoder/decoder chain: decorrelating transform, truncation,
// shared-step scalar quantization, canonical Huffman coding, and the
// self-describing ATCS container. Also calibration, conv/BN/transform
// folding, and the 8-bit transform quantization.

#ifndef ATC_CODEC_HPP
#define ATC_CODEC_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "atc/quant.hpp"
#include "atc/stats.hpp"
#include "atc/tensor.hpp"
#include "atc/vlc.hpp"

namespace atc {

enum class TransformPrecision : uint8_t {
  kFloat32 = 1,
  kInt8 = 2,
};

// Container transform modes (wire values).
enum class TransformMode : uint8_t {
  kExternal = 0,        // decoder takes the transform from the profile
  kFloat32Embedded = 1,
  kInt8Embedded = 2,
};

enum class Nonlinearity : uint8_t {
  kNone = 0,
  kAfterDecoder = 1,   // default: ReLU applied by the decoder
  kBeforeEncoder = 2,  // ablation arm: ReLU applied before encoding
};

struct LayerCodecConfig {
  BlockShape block;
  // Exactly one of the three quantizer selectors must be set.
  std::optional<double> target_rate;    // bits/value; step solved numerically
  std::optional<double> explicit_step;
  std::optional<int> bitwidth;          // step = 2*clip / (2^B - 1)
  double clip_mult = 4.0;               // clip = clip_mult * sigma of the anchor channel
  uint32_t truncate = 0;                // kept coefficients; 0 means keep all n
  TransformPrecision precision = TransformPrecision::kFloat32;
  bool use_klt = true;                  // off = direct quantization (ablation)
  bool embed_transform = false;         // carry the transform in the stream
  Nonlinearity nonlinearity = Nonlinearity::kAfterDecoder;

  uint32_t kept(uint32_t n) const { return truncate == 0 ? n : truncate; }
  void validate() const;
};

struct QuantizedTransform {
  std::vector<int8_t> values;  // row-major n*n
  double scale = 1.0;          // f64 so scale * 127 round-trips the peak exactly
};

// Symmetric per-matrix 8-bit quantization: scale = max|T_ij| / 127.
QuantizedTransform quantize_transform(const Matrix& transform);
Matrix reconstruct_transform(const QuantizedTransform& qt, size_t n);

struct ProfileEntry {
  LayerCodecConfig config;
  uint32_t n = 0;
  // Effective transform used by both encoder and decoder: float32-rounded
  // or int8-reconstructed per config.precision. Identity with zero mean when
  // use_klt is off.
  KLTransform transform;
  QuantizedTransform transform_int8;  // populated for int8 precision
  QuantizerSpec quant;                // step/clip hold exact f32 values
  HuffmanCodebook codebook;
  std::vector<float> channel_means;   // padding policy from calibration
};

struct CalibrationProfile {
  std::string model_id;
  uint64_t sample_count = 0;  // calibration batch size (tensors per layer)
  std::vector<ProfileEntry> entries;
};

// Learns one layer's entry from its calibration batch: covariance over
// blocks, transform, step from the anchor-channel rule, histogram of
// quantized coefficients, codebook (escape always included with count 1).
// The caller is responsible for feeding batches that already passed through
// the quantized earlier layers. `model_out`, when given, receives the
// accumulated covariance model.
ProfileEntry calibrate_layer(std::span<const ActivationTensor> batch,
                             const LayerCodecConfig& config,
                             CovarianceModel* model_out = nullptr);

// Plain multi-stream calibration: one entry per (batch, config) pair.
CalibrationProfile calibrate(std::span<const std::vector<ActivationTensor>> layer_batches,
                             std::span<const LayerCodecConfig> configs,
                             const std::string& model_id);

// ATCP profile file format; see README for the layout.
std::vector<uint8_t> profile_to_bytes(const CalibrationProfile& profile);
CalibrationProfile profile_from_bytes(std::span<const uint8_t> bytes);
void save_profile(const CalibrationProfile& profile, const std::string& path);
CalibrationProfile load_profile(const std::string& path);

// Self-describing compressed container (ATCS wire format; all little-endian):
//   magic "ATCS" | u16 version | u32 H,W,C | u16 bw,bh,bc | f32 step
//   | f32 clip | u16 truncation | u8 transform mode | [transform payload:
//   f32 mean[n], then mode 1: f32 matrix[n*n] / mode 2: f64 scale,
//   i8 matrix[n*n]] | codebook | u64 symbol count | payload bits padded
//   with zeros to a byte boundary.
struct CompressedActivation {
  uint32_t height = 0, width = 0, channels = 0;
  BlockShape shape;
  float step = 1.0f;
  float clip = 0.5f;
  uint32_t truncation = 0;
  TransformMode mode = TransformMode::kExternal;
  std::vector<float> embedded_mean;
  std::vector<float> embedded_matrix;   // mode 1
  QuantizedTransform embedded_int8;     // mode 2
  HuffmanCodebook codebook;
  uint64_t symbol_count = 0;
  BitStream payload;

  // Measured sizes. payload_bits is exact for containers produced by
  // encode_layer; for containers loaded from disk it is the padded byte
  // count until a decode recovers the exact value.
  uint64_t payload_bits = 0;
  uint64_t header_bits = 0;

  size_t value_count() const {
    return static_cast<size_t>(height) * width * channels;
  }
};

std::vector<uint8_t> container_to_bytes(const CompressedActivation& ca);
CompressedActivation container_from_bytes(std::span<const uint8_t> bytes);
void save_container(const CompressedActivation& ca, const std::string& path);
CompressedActivation load_container(const std::string& path);

// Full encode: partition -> transform -> truncate -> quantize (single shared
// step) -> Huffman, blocks in deterministic order.
CompressedActivation encode_layer(const ActivationTensor& t, const ProfileEntry& entry);

// Encode a tensor that is already in the transform domain (folded-conv path;
// requires a 1x1xC block shape).
CompressedActivation encode_transformed(const ActivationTensor& transformed,
                                        const ProfileEntry& entry);

// Full decode: Huffman decode -> dequantize -> restore truncated
// coefficients as zero -> inverse transform -> reassemble/crop -> ReLU when
// the entry places the nonlinearity after the decoder.
ActivationTensor decode_layer(const CompressedActivation& ca, const ProfileEntry& entry,
                              uint64_t* consumed_payload_bits = nullptr);

// Convolution weights stored (out, in, ky, kx), with per-output bias.
struct ConvWeights {
  uint32_t out_channels = 0;
  uint32_t in_channels = 0;
  uint32_t kh = 1, kw = 1;
  std::vector<double> weights;  // out*in*kh*kw
  std::vector<double> bias;     // out

  size_t index(uint32_t o, uint32_t i, uint32_t y, uint32_t x) const {
    return ((static_cast<size_t>(o) * in_channels + i) * kh + y) * kw + x;
  }
  void validate() const;
};

// Batch normalization y = gamma * (x - mean) / std + beta, per channel.
struct BnParams {
  std::vector<double> gamma, beta, mean, std;

  static BnParams identity(uint32_t channels);
  void validate(uint32_t channels) const;
};

// Folds conv + BN + forward transform into a single convolution:
//   W' = T diag(gamma/std) W per spatial tap
//   b' = T (diag(gamma/std)(b - mean) + beta - transform_mean)
// Requires the transform to act on 1x1xC blocks (channel mixing only).
ConvWeights fold(const ConvWeights& conv, const BnParams& bn, const KLTransform& transform);

// Payload bits (optionally plus header bits) per original tensor value.
double measured_rate(const CompressedActivation& ca, bool include_header);

ActivationTensor apply_relu(ActivationTensor t);

}  // namespace atc

#endif  // ATC_CODEC_HPP
