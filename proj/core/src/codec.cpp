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

#include "atc/codec.hpp"

#include <algorithm>
#include <cmath>

#include "atc/bytes.hpp"

namespace atc {

namespace {

constexpr char kContainerMagic[4] = {'A', 'T', 'C', 'S'};
constexpr char kProfileMagic[4] = {'A', 'T', 'C', 'P'};
constexpr uint16_t kContainerVersion = 1;
constexpr uint16_t kProfileVersion = 1;

}  // namespace

void LayerCodecConfig::validate() const {
  if (block.bw == 0 || block.bh == 0 || block.bc == 0)
    throw_validation(Errc::kInvalidArgument, "block extents must be positive");
  int selectors = (target_rate ? 1 : 0) + (explicit_step ? 1 : 0) + (bitwidth ? 1 : 0);
  if (selectors != 1)
    throw_validation(Errc::kInvalidArgument,
                     "exactly one of target_rate, explicit_step, bitwidth must be set");
  if (target_rate && !(*target_rate > 0.0))
    throw_validation(Errc::kInvalidArgument, "target rate must be positive");
  if (explicit_step && !(*explicit_step > 0.0))
    throw_validation(Errc::kInvalidArgument, "explicit step must be positive");
  if (bitwidth && (*bitwidth < 1 || *bitwidth > 24))
    throw_validation(Errc::kInvalidArgument, "bitwidth must be in [1, 24]");
  if (truncate > block.n())
    throw_validation(Errc::kInvalidArgument, "truncation exceeds block size");
  if (block.n() > 65535)
    throw_validation(Errc::kInvalidArgument, "block size exceeds container limits");
}

QuantizedTransform quantize_transform(const Matrix& transform) {
  QuantizedTransform qt;
  const double peak = max_abs(transform);
  qt.scale = peak > 0.0 ? peak / 127.0 : 1.0;
  qt.values.reserve(transform.data().size());
  for (double v : transform.data()) {
    double q = std::round(v / qt.scale);
    q = std::clamp(q, -127.0, 127.0);
    qt.values.push_back(static_cast<int8_t>(q));
  }
  return qt;
}

Matrix reconstruct_transform(const QuantizedTransform& qt, size_t n) {
  if (qt.values.size() != n * n)
    throw_validation(Errc::kDimMismatch, "quantized transform size mismatch");
  Matrix m(n, n);
  for (size_t i = 0; i < qt.values.size(); ++i)
    m.data()[i] = static_cast<double>(qt.values[i]) * qt.scale;
  return m;
}

void ConvWeights::validate() const {
  if (out_channels == 0 || in_channels == 0 || kh == 0 || kw == 0)
    throw_validation(Errc::kInvalidArgument, "conv dims must be positive");
  if (weights.size() != static_cast<size_t>(out_channels) * in_channels * kh * kw)
    throw_validation(Errc::kDimMismatch, "conv weight payload size mismatch");
  if (bias.size() != out_channels)
    throw_validation(Errc::kDimMismatch, "conv bias size mismatch");
}

BnParams BnParams::identity(uint32_t channels) {
  BnParams bn;
  bn.gamma.assign(channels, 1.0);
  bn.beta.assign(channels, 0.0);
  bn.mean.assign(channels, 0.0);
  bn.std.assign(channels, 1.0);
  return bn;
}

void BnParams::validate(uint32_t channels) const {
  if (gamma.size() != channels || beta.size() != channels || mean.size() != channels ||
      std.size() != channels)
    throw_validation(Errc::kDimMismatch, "BN parameter size mismatch");
  for (double s : std)
    if (!(s > 0.0)) throw_validation(Errc::kInvalidArgument, "BN std must be positive");
}

ActivationTensor apply_relu(ActivationTensor t) {
  for (float& v : t.data) v = v > 0.0f ? v : 0.0f;
  return t;
}

// ---------------------------------------------------------------------------
// Calibration
// ---------------------------------------------------------------------------

namespace {

std::vector<float> per_channel_means(std::span<const ActivationTensor> batch) {
  const uint32_t channels = batch.front().channels;
  std::vector<double> sums(channels, 0.0);
  uint64_t pixels = 0;
  for (const auto& t : batch) {
    if (t.channels != channels)
      throw_validation(Errc::kDimMismatch, "calibration batch has mixed channel counts");
    pixels += static_cast<uint64_t>(t.height) * t.width;
    for (uint32_t h = 0; h < t.height; ++h)
      for (uint32_t w = 0; w < t.width; ++w)
        for (uint32_t c = 0; c < channels; ++c) sums[c] += t.at(h, w, c);
  }
  std::vector<float> means(channels);
  for (uint32_t c = 0; c < channels; ++c)
    means[c] = static_cast<float>(sums[c] / static_cast<double>(pixels));
  return means;
}

std::vector<double> round_to_f32(std::span<const double> v) {
  std::vector<double> out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = static_cast<double>(static_cast<float>(v[i]));
  return out;
}

// Quantized transform coefficients of one block (first `kept` components).
void block_symbols(const ProfileEntry& entry, std::span<const double> block,
                   bool already_transformed, std::vector<int32_t>& out) {
  const uint32_t kept = entry.config.kept(entry.n);
  std::vector<double> y;
  if (entry.config.use_klt && !already_transformed) {
    y = klt_forward(entry.transform, block);
  } else {
    y.assign(block.begin(), block.end());
  }
  for (uint32_t i = 0; i < kept; ++i) out.push_back(quantize_one(y[i], entry.quant));
}

}  // namespace

ProfileEntry calibrate_layer(std::span<const ActivationTensor> batch,
                             const LayerCodecConfig& config, CovarianceModel* model_out) {
  config.validate();
  if (batch.empty()) throw_validation(Errc::kInvalidArgument, "empty calibration batch");

  // With the before-encoder nonlinearity the encoder sees ReLU'd data, so
  // every statistic is gathered on the same.
  std::vector<ActivationTensor> relu_batch;
  if (config.nonlinearity == Nonlinearity::kBeforeEncoder) {
    relu_batch.reserve(batch.size());
    for (const auto& t : batch) relu_batch.push_back(apply_relu(t));
    batch = relu_batch;
  }

  ProfileEntry entry;
  entry.config = config;
  entry.n = config.block.n();
  entry.channel_means = per_channel_means(batch);

  CovarianceModel model(entry.n);
  for (const auto& t : batch) {
    BlockSequence seq = partition(t, config.block, PaddingPolicy{entry.channel_means});
    for (const auto& block : seq.blocks) model.add(block);
  }
  if (model_out) *model_out = model;

  if (config.use_klt) {
    KLTransform klt = make_klt(model);
    entry.transform = std::move(klt);
  } else {
    // Direct quantization: identity transform, no mean removal; the spectrum
    // holds the raw per-component variances (unsorted).
    Matrix cov = model.covariance();
    entry.transform.matrix = Matrix::identity(entry.n);
    entry.transform.mean.assign(entry.n, 0.0);
    entry.transform.spectrum.resize(entry.n);
    for (uint32_t i = 0; i < entry.n; ++i) entry.transform.spectrum[i] = cov(i, i);
  }

  // Pin the serialized precision now so a saved-and-reloaded profile encodes
  // bit-identically.
  entry.transform.mean = round_to_f32(entry.transform.mean);
  if (config.precision == TransformPrecision::kInt8) {
    entry.transform_int8 = quantize_transform(entry.transform.matrix);
    entry.transform.matrix = reconstruct_transform(entry.transform_int8, entry.n);
  } else {
    for (double& v : entry.transform.matrix.data())
      v = static_cast<double>(static_cast<float>(v));
  }

  // Anchor-channel rule: range from the highest-variance transform channel,
  // one shared step for the whole layer.
  double anchor_var = 0.0;
  for (double v : entry.transform.spectrum) anchor_var = std::max(anchor_var, v);
  const double sigma_anchor = std::sqrt(std::max(anchor_var, 0.0));

  double clip = config.clip_mult * sigma_anchor;
  double step;
  if (config.explicit_step) {
    step = *config.explicit_step;
  } else if (sigma_anchor > 0.0) {
    step = config.bitwidth ? 2.0 * clip / (std::exp2(*config.bitwidth) - 1.0)
                           : step_for_rate_exact(*config.target_rate, sigma_anchor);
  } else {
    // Degenerate constant layer: every coefficient quantizes to bin zero.
    step = 1.0;
  }
  clip = std::max(clip, step / 2.0);
  const float step_f = static_cast<float>(step);
  const float clip_f = static_cast<float>(clip);
  entry.quant = make_quantizer(static_cast<double>(step_f), static_cast<double>(clip_f));

  SymbolHistogram hist;
  std::vector<int32_t> symbols;
  for (const auto& t : batch) {
    BlockSequence seq = partition(t, config.block, PaddingPolicy{entry.channel_means});
    for (const auto& block : seq.blocks) {
      symbols.clear();
      block_symbols(entry, block, false, symbols);
      hist.add_all(symbols);
    }
  }
  entry.codebook = build_codebook(hist, /*with_escape=*/true);
  return entry;
}

CalibrationProfile calibrate(std::span<const std::vector<ActivationTensor>> layer_batches,
                             std::span<const LayerCodecConfig> configs,
                             const std::string& model_id) {
  if (layer_batches.size() != configs.size())
    throw_validation(Errc::kDimMismatch, "one config per layer batch required");
  CalibrationProfile profile;
  profile.model_id = model_id;
  profile.sample_count = layer_batches.empty() ? 0 : layer_batches.front().size();
  for (size_t i = 0; i < layer_batches.size(); ++i)
    profile.entries.push_back(calibrate_layer(layer_batches[i], configs[i]));
  return profile;
}

// ---------------------------------------------------------------------------
// Encode / decode
// ---------------------------------------------------------------------------

namespace {

CompressedActivation encode_blocks(const ActivationTensor& t, const ProfileEntry& entry,
                                   bool already_transformed) {
  if (entry.n != entry.config.block.n())
    throw_validation(Errc::kDimMismatch, "profile entry block size mismatch");
  if (entry.config.block.bc > t.channels)
    throw_validation(Errc::kDimMismatch, "block channel extent exceeds tensor channels");

  PaddingPolicy policy;
  if (!already_transformed) policy.channel_means = entry.channel_means;
  BlockSequence seq = partition(t, entry.config.block, std::move(policy));

  const uint32_t kept = entry.config.kept(entry.n);
  std::vector<int32_t> symbols;
  symbols.reserve(seq.blocks.size() * kept);
  for (const auto& block : seq.blocks)
    block_symbols(entry, block, already_transformed, symbols);

  CompressedActivation ca;
  ca.height = t.height;
  ca.width = t.width;
  ca.channels = t.channels;
  ca.shape = entry.config.block;
  ca.step = static_cast<float>(entry.quant.step);
  ca.clip = static_cast<float>(entry.quant.clip);
  ca.truncation = kept;
  ca.codebook = entry.codebook;
  ca.symbol_count = symbols.size();
  if (entry.config.embed_transform) {
    ca.mode = entry.config.precision == TransformPrecision::kInt8
                  ? TransformMode::kInt8Embedded
                  : TransformMode::kFloat32Embedded;
    ca.embedded_mean.resize(entry.n);
    for (uint32_t i = 0; i < entry.n; ++i)
      ca.embedded_mean[i] = static_cast<float>(entry.transform.mean[i]);
    if (ca.mode == TransformMode::kInt8Embedded) {
      ca.embedded_int8 = entry.transform_int8;
    } else {
      ca.embedded_matrix.resize(static_cast<size_t>(entry.n) * entry.n);
      for (size_t i = 0; i < ca.embedded_matrix.size(); ++i)
        ca.embedded_matrix[i] = static_cast<float>(entry.transform.matrix.data()[i]);
    }
  }
  ca.payload = vlc_encode(symbols, entry.codebook);
  ca.payload_bits = ca.payload.bit_count;
  // Header size = container minus payload bytes.
  std::vector<uint8_t> bytes = container_to_bytes(ca);
  ca.header_bits = 8 * (bytes.size() - ca.payload.bytes.size());
  return ca;
}

}  // namespace

CompressedActivation encode_layer(const ActivationTensor& t, const ProfileEntry& entry) {
  if (entry.config.nonlinearity == Nonlinearity::kBeforeEncoder)
    return encode_blocks(apply_relu(t), entry, false);
  return encode_blocks(t, entry, false);
}

CompressedActivation encode_transformed(const ActivationTensor& transformed,
                                        const ProfileEntry& entry) {
  if (entry.config.block.bw != 1 || entry.config.block.bh != 1)
    throw_validation(Errc::kInvalidArgument,
                     "transform-domain encoding requires 1x1xC blocks");
  if (entry.config.nonlinearity == Nonlinearity::kBeforeEncoder)
    throw_validation(Errc::kInvalidArgument,
                     "before-encoder nonlinearity cannot be used on folded outputs");
  return encode_blocks(transformed, entry, true);
}

ActivationTensor decode_layer(const CompressedActivation& ca, const ProfileEntry& entry,
                              uint64_t* consumed_payload_bits) {
  const uint32_t n = ca.shape.n();
  if (entry.n != n)
    throw_validation(Errc::kDimMismatch, "container block size does not match profile entry");
  if (!(ca.shape == entry.config.block))
    throw_validation(Errc::kDimMismatch, "container block shape does not match profile entry");
  if (ca.truncation == 0 || ca.truncation > n)
    throw_validation(Errc::kCorruptStream, "invalid truncation in container");

  // Transform source: embedded when present, profile otherwise.
  const Matrix* matrix = &entry.transform.matrix;
  std::vector<double> mean(entry.transform.mean.begin(), entry.transform.mean.end());
  Matrix embedded;
  if (ca.mode != TransformMode::kExternal) {
    if (ca.embedded_mean.size() != n)
      throw_validation(Errc::kCorruptStream, "embedded transform mean size mismatch");
    mean.assign(ca.embedded_mean.begin(), ca.embedded_mean.end());
    if (ca.mode == TransformMode::kInt8Embedded) {
      embedded = reconstruct_transform(ca.embedded_int8, n);
    } else {
      if (ca.embedded_matrix.size() != static_cast<size_t>(n) * n)
        throw_validation(Errc::kCorruptStream, "embedded transform matrix size mismatch");
      embedded = Matrix(n, n);
      for (size_t i = 0; i < ca.embedded_matrix.size(); ++i)
        embedded.data()[i] = ca.embedded_matrix[i];
    }
    matrix = &embedded;
  }

  BlockSequence seq;
  seq.height = ca.height;
  seq.width = ca.width;
  seq.channels = ca.channels;
  seq.shape = ca.shape;
  const size_t blocks = seq.block_count();
  const uint32_t kept = ca.truncation;
  if (ca.symbol_count != blocks * static_cast<uint64_t>(kept))
    throw_validation(Errc::kCorruptStream, "symbol count does not match block grid");

  const QuantizerSpec spec =
      make_quantizer(static_cast<double>(ca.step), static_cast<double>(ca.clip));
  const int32_t kmax = spec.max_bin();

  BitReader reader(ca.payload);
  std::vector<int32_t> symbols = vlc_decode(reader, ca.codebook, ca.symbol_count);
  if (consumed_payload_bits) *consumed_payload_bits = reader.position();
  reader.check_zero_padding();

  seq.blocks.reserve(blocks);
  std::vector<double> y(n, 0.0);
  size_t pos = 0;
  for (size_t b = 0; b < blocks; ++b) {
    std::fill(y.begin(), y.end(), 0.0);
    for (uint32_t i = 0; i < kept; ++i) {
      const int32_t k = symbols[pos++];
      if (k < -kmax || k > kmax)
        throw_validation(Errc::kCorruptStream, "bin index outside quantizer range");
      y[i] = dequantize_one(k, spec);
    }
    if (entry.config.use_klt && ca.mode != TransformMode::kExternal) {
      std::vector<double> x = matvec_transposed(*matrix, y);
      for (uint32_t i = 0; i < n; ++i) x[i] += mean[i];
      seq.blocks.push_back(std::move(x));
    } else if (entry.config.use_klt) {
      seq.blocks.push_back(klt_inverse(entry.transform, y));
    } else {
      seq.blocks.push_back(y);
    }
  }

  ActivationTensor out = reassemble(seq);
  if (entry.config.nonlinearity == Nonlinearity::kAfterDecoder) out = apply_relu(std::move(out));
  return out;
}

// ---------------------------------------------------------------------------
// Folding
// ---------------------------------------------------------------------------

ConvWeights fold(const ConvWeights& conv, const BnParams& bn, const KLTransform& transform) {
  conv.validate();
  bn.validate(conv.out_channels);
  const uint32_t out = conv.out_channels;
  if (transform.dim() != out)
    throw_validation(Errc::kDimMismatch,
                     "transform must mix exactly the conv output channels (1x1xC blocks)");

  ConvWeights folded;
  folded.out_channels = out;
  folded.in_channels = conv.in_channels;
  folded.kh = conv.kh;
  folded.kw = conv.kw;
  folded.weights.assign(conv.weights.size(), 0.0);
  folded.bias.assign(out, 0.0);

  std::vector<double> bn_scale(out);
  for (uint32_t c = 0; c < out; ++c) bn_scale[c] = bn.gamma[c] / bn.std[c];

  for (uint32_t o = 0; o < out; ++o) {
    for (uint32_t c = 0; c < out; ++c) {
      const double w = transform.matrix(o, c) * bn_scale[c];
      if (w == 0.0) continue;
      for (uint32_t i = 0; i < conv.in_channels; ++i)
        for (uint32_t ky = 0; ky < conv.kh; ++ky)
          for (uint32_t kx = 0; kx < conv.kw; ++kx)
            folded.weights[folded.index(o, i, ky, kx)] += w * conv.weights[conv.index(c, i, ky, kx)];
    }
    double b = 0.0;
    for (uint32_t c = 0; c < out; ++c)
      b += transform.matrix(o, c) *
           (bn_scale[c] * (conv.bias[c] - bn.mean[c]) + bn.beta[c] - transform.mean[c]);
    folded.bias[o] = b;
  }
  return folded;
}

double measured_rate(const CompressedActivation& ca, bool include_header) {
  const double values = static_cast<double>(ca.value_count());
  double bits = static_cast<double>(ca.payload_bits);
  if (include_header) bits += static_cast<double>(ca.header_bits);
  return bits / values;
}

// ---------------------------------------------------------------------------
// Container wire format
// ---------------------------------------------------------------------------

std::vector<uint8_t> container_to_bytes(const CompressedActivation& ca) {
  ByteWriter w;
  w.magic(kContainerMagic);
  w.u16(kContainerVersion);
  w.u32(ca.height);
  w.u32(ca.width);
  w.u32(ca.channels);
  w.u16(static_cast<uint16_t>(ca.shape.bw));
  w.u16(static_cast<uint16_t>(ca.shape.bh));
  w.u16(static_cast<uint16_t>(ca.shape.bc));
  w.f32(ca.step);
  w.f32(ca.clip);
  w.u16(static_cast<uint16_t>(ca.truncation));
  w.u8(static_cast<uint8_t>(ca.mode));
  if (ca.mode != TransformMode::kExternal) {
    for (float v : ca.embedded_mean) w.f32(v);
    if (ca.mode == TransformMode::kInt8Embedded) {
      w.f64(ca.embedded_int8.scale);
      w.bytes(ca.embedded_int8.values.data(), ca.embedded_int8.values.size());
    } else {
      for (float v : ca.embedded_matrix) w.f32(v);
    }
  }
  ca.codebook.serialize(w);
  w.u64(ca.symbol_count);
  w.bytes(ca.payload.bytes.data(), ca.payload.bytes.size());
  return w.take();
}

CompressedActivation container_from_bytes(std::span<const uint8_t> bytes) {
  ByteReader r(bytes);
  if (!r.check_magic(kContainerMagic))
    throw_validation(Errc::kBadMagic, "not an ATCS container");
  const uint16_t version = r.u16();
  if (version != kContainerVersion)
    throw_validation(Errc::kBadVersion, "unsupported ATCS version " + std::to_string(version));
  CompressedActivation ca;
  ca.height = r.u32();
  ca.width = r.u32();
  ca.channels = r.u32();
  ca.shape.bw = r.u16();
  ca.shape.bh = r.u16();
  ca.shape.bc = r.u16();
  ca.step = r.f32();
  ca.clip = r.f32();
  ca.truncation = r.u16();
  const uint8_t mode = r.u8();
  if (mode > 2) throw_validation(Errc::kCorruptStream, "unknown transform mode");
  ca.mode = static_cast<TransformMode>(mode);
  const size_t n = ca.shape.n();
  if (n == 0 || ca.height == 0 || ca.width == 0 || ca.channels == 0)
    throw_validation(Errc::kCorruptStream, "zero dimension in container header");
  if (static_cast<uint64_t>(ca.height) * ca.width * ca.channels > (uint64_t{1} << 31))
    throw_validation(Errc::kCorruptStream, "container dimensions exceed the supported size");
  if (ca.mode != TransformMode::kExternal) {
    ca.embedded_mean.resize(n);
    for (auto& v : ca.embedded_mean) v = r.f32();
    if (ca.mode == TransformMode::kInt8Embedded) {
      ca.embedded_int8.scale = r.f64();
      ca.embedded_int8.values.resize(n * n);
      r.bytes(ca.embedded_int8.values.data(), n * n);
    } else {
      ca.embedded_matrix.resize(n * n);
      for (auto& v : ca.embedded_matrix) v = r.f32();
    }
  }
  ca.codebook = HuffmanCodebook::deserialize(r);
  ca.symbol_count = r.u64();
  ca.header_bits = 8 * r.pos();
  auto payload = r.rest();
  ca.payload.bytes.assign(payload.begin(), payload.end());
  ca.payload.bit_count = 8 * static_cast<uint64_t>(payload.size());
  ca.payload_bits = ca.payload.bit_count;  // exact value recovered on decode
  return ca;
}

void save_container(const CompressedActivation& ca, const std::string& path) {
  write_file_atomic(path, container_to_bytes(ca));
}

CompressedActivation load_container(const std::string& path) {
  return container_from_bytes(read_file(path));
}

// ---------------------------------------------------------------------------
// Profile wire format
// ---------------------------------------------------------------------------

namespace {

void serialize_entry(ByteWriter& w, const ProfileEntry& e) {
  const LayerCodecConfig& cfg = e.config;
  w.u32(e.n);
  w.u16(static_cast<uint16_t>(cfg.block.bw));
  w.u16(static_cast<uint16_t>(cfg.block.bh));
  w.u16(static_cast<uint16_t>(cfg.block.bc));
  uint8_t selector = cfg.target_rate ? 0 : (cfg.explicit_step ? 1 : 2);
  w.u8(selector);
  w.f64(cfg.target_rate ? *cfg.target_rate
                        : (cfg.explicit_step ? *cfg.explicit_step
                                             : static_cast<double>(*cfg.bitwidth)));
  w.f64(cfg.clip_mult);
  w.u16(static_cast<uint16_t>(cfg.truncate));
  w.u8(static_cast<uint8_t>(cfg.precision));
  w.u8(cfg.use_klt ? 1 : 0);
  w.u8(cfg.embed_transform ? 1 : 0);
  w.u8(static_cast<uint8_t>(cfg.nonlinearity));
  w.f32(static_cast<float>(e.quant.step));
  w.f32(static_cast<float>(e.quant.clip));
  for (double v : e.transform.mean) w.f32(static_cast<float>(v));
  if (cfg.precision == TransformPrecision::kInt8) {
    w.f64(e.transform_int8.scale);
    w.bytes(e.transform_int8.values.data(), e.transform_int8.values.size());
  } else {
    for (double v : e.transform.matrix.data()) w.f32(static_cast<float>(v));
  }
  for (double v : e.transform.spectrum) w.f64(v);
  w.u32(static_cast<uint32_t>(e.channel_means.size()));
  for (float v : e.channel_means) w.f32(v);
  e.codebook.serialize(w);
}

ProfileEntry deserialize_entry(ByteReader& r) {
  ProfileEntry e;
  e.n = r.u32();
  e.config.block.bw = r.u16();
  e.config.block.bh = r.u16();
  e.config.block.bc = r.u16();
  if (e.config.block.n() != e.n)
    throw_validation(Errc::kCorruptStream, "profile entry block size mismatch");
  const uint8_t selector = r.u8();
  const double selector_value = r.f64();
  switch (selector) {
    case 0: e.config.target_rate = selector_value; break;
    case 1: e.config.explicit_step = selector_value; break;
    case 2: e.config.bitwidth = static_cast<int>(selector_value); break;
    default: throw_validation(Errc::kCorruptStream, "bad quantizer selector");
  }
  e.config.clip_mult = r.f64();
  e.config.truncate = r.u16();
  const uint8_t precision = r.u8();
  if (precision != 1 && precision != 2)
    throw_validation(Errc::kCorruptStream, "bad transform precision");
  e.config.precision = static_cast<TransformPrecision>(precision);
  e.config.use_klt = r.u8() != 0;
  e.config.embed_transform = r.u8() != 0;
  const uint8_t nl = r.u8();
  if (nl > 2) throw_validation(Errc::kCorruptStream, "bad nonlinearity flag");
  e.config.nonlinearity = static_cast<Nonlinearity>(nl);
  const float step = r.f32();
  const float clip = r.f32();
  e.quant = make_quantizer(static_cast<double>(step), static_cast<double>(clip));
  const size_t n = e.n;
  e.transform.mean.resize(n);
  for (auto& v : e.transform.mean) v = static_cast<double>(r.f32());
  if (e.config.precision == TransformPrecision::kInt8) {
    e.transform_int8.scale = r.f64();
    e.transform_int8.values.resize(n * n);
    r.bytes(e.transform_int8.values.data(), n * n);
    e.transform.matrix = reconstruct_transform(e.transform_int8, n);
  } else {
    e.transform.matrix = Matrix(n, n);
    for (auto& v : e.transform.matrix.data()) v = static_cast<double>(r.f32());
  }
  e.transform.spectrum.resize(n);
  for (auto& v : e.transform.spectrum) v = r.f64();
  const uint32_t means = r.u32();
  e.channel_means.resize(means);
  for (auto& v : e.channel_means) v = r.f32();
  e.codebook = HuffmanCodebook::deserialize(r);
  return e;
}

}  // namespace

std::vector<uint8_t> profile_to_bytes(const CalibrationProfile& profile) {
  ByteWriter w;
  w.magic(kProfileMagic);
  w.u16(kProfileVersion);
  w.u64(profile.sample_count);
  w.u32(static_cast<uint32_t>(profile.model_id.size()));
  w.bytes(profile.model_id.data(), profile.model_id.size());
  w.u32(static_cast<uint32_t>(profile.entries.size()));
  for (const auto& e : profile.entries) serialize_entry(w, e);
  return w.take();
}

CalibrationProfile profile_from_bytes(std::span<const uint8_t> bytes) {
  ByteReader r(bytes);
  if (!r.check_magic(kProfileMagic))
    throw_validation(Errc::kBadMagic, "not an ATCP profile");
  const uint16_t version = r.u16();
  if (version != kProfileVersion)
    throw_validation(Errc::kBadVersion, "unsupported ATCP version " + std::to_string(version));
  CalibrationProfile profile;
  profile.sample_count = r.u64();
  const uint32_t id_len = r.u32();
  if (id_len > (1u << 20)) throw_validation(Errc::kCorruptStream, "model id too long");
  profile.model_id.resize(id_len);
  if (id_len) r.bytes(profile.model_id.data(), id_len);
  const uint32_t count = r.u32();
  profile.entries.reserve(count);
  for (uint32_t i = 0; i < count; ++i) profile.entries.push_back(deserialize_entry(r));
  return profile;
}

void save_profile(const CalibrationProfile& profile, const std::string& path) {
  write_file_atomic(path, profile_to_bytes(profile));
}

CalibrationProfile load_profile(const std::string& path) {
  return profile_from_bytes(read_file(path));
}

}  // namespace atc
