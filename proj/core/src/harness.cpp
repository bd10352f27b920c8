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

#include "atc/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <sstream>
#include <thread>

#include "atc/bytes.hpp"
#include "json.hpp"

namespace atc::harness {

using nlohmann::json;

namespace {

void parallel_for(size_t count, int threads, const std::function<void(size_t)>& fn) {
  if (threads <= 1 || count <= 1) {
    for (size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (;;) {
      size_t i = next.fetch_add(1);
      if (i >= count) return;
      fn(i);
    }
  };
  size_t workers = std::min<size_t>(threads, count);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (size_t i = 0; i < workers; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

}  // namespace

// ---------------------------------------------------------------------------
// Synthetic sources
// ---------------------------------------------------------------------------

SyntheticSource::SyntheticSource(Matrix sigma, std::vector<double> mu, uint64_t seed)
    : sigma_(std::move(sigma)), mu_(std::move(mu)), seed_(seed), stream_(seed) {
  if (sigma_.rows() != sigma_.cols() || sigma_.rows() == 0)
    throw_validation(Errc::kDimMismatch, "source covariance must be square");
  if (mu_.size() != sigma_.rows())
    throw_validation(Errc::kDimMismatch, "source mean length must match covariance");
  chol_ = cholesky(sigma_);
}

std::vector<std::vector<double>> SyntheticSource::generate(size_t count) {
  const size_t n = dim();
  std::vector<std::vector<double>> out;
  out.reserve(count);
  std::vector<double> z(n);
  for (size_t s = 0; s < count; ++s) {
    stream_.fill(z);
    std::vector<double> x(mu_);
    for (size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (size_t j = 0; j <= i; ++j) acc += chol_(i, j) * z[j];
      x[i] += acc;
    }
    out.push_back(std::move(x));
  }
  return out;
}

ActivationTensor SyntheticSource::tensor(uint32_t height, uint32_t width, uint32_t channels,
                                         const BlockShape& shape) {
  if (shape.n() != dim())
    throw_validation(Errc::kDimMismatch, "block size must equal source dimension");
  if (height % shape.bh || width % shape.bw || channels % shape.bc)
    throw_validation(Errc::kInvalidArgument,
                     "tensor dims must be multiples of the block extents");
  BlockSequence seq;
  seq.height = height;
  seq.width = width;
  seq.channels = channels;
  seq.shape = shape;
  seq.blocks = generate(seq.block_count());
  return reassemble(seq);
}

std::vector<ActivationTensor> SyntheticSource::tensors(size_t count, uint32_t height,
                                                       uint32_t width, uint32_t channels,
                                                       const BlockShape& shape) {
  std::vector<ActivationTensor> out;
  out.reserve(count);
  for (size_t i = 0; i < count; ++i) out.push_back(tensor(height, width, channels, shape));
  return out;
}

SyntheticSource SyntheticSource::clone_with_seed(uint64_t salt) const {
  return SyntheticSource(sigma_, mu_, seed_ ^ salt);
}

Matrix equicorrelated(size_t n, double rho, double variance) {
  Matrix m(n, n);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j) m(i, j) = variance * (i == j ? 1.0 : rho);
  return m;
}

Matrix diagonal_matrix(std::span<const double> variances) {
  Matrix m(variances.size(), variances.size());
  for (size_t i = 0; i < variances.size(); ++i) m(i, i) = variances[i];
  return m;
}

Matrix rotated_spectrum(std::span<const double> spectrum, uint64_t seed) {
  const size_t n = spectrum.size();
  GaussianStream stream(seed);
  Matrix q(n, n);
  // Gram-Schmidt rows of a Gaussian matrix; deterministic given the seed.
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) q(i, j) = stream.next();
    for (size_t k = 0; k < i; ++k) {
      double dot = 0.0;
      for (size_t j = 0; j < n; ++j) dot += q(i, j) * q(k, j);
      for (size_t j = 0; j < n; ++j) q(i, j) -= dot * q(k, j);
    }
    double norm = 0.0;
    for (size_t j = 0; j < n; ++j) norm += q(i, j) * q(i, j);
    norm = std::sqrt(norm);
    if (norm < 1e-12) throw_numeric(Errc::kNonConvergence, "degenerate rotation draw");
    for (size_t j = 0; j < n; ++j) q(i, j) /= norm;
  }
  Matrix sigma(n, n);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (size_t k = 0; k < n; ++k) acc += spectrum[k] * q(k, i) * q(k, j);
      sigma(i, j) = acc;
    }
  return sigma;
}

KroneckerSource::KroneckerSource(uint32_t patch_h, uint32_t patch_w, Matrix spatial_cov,
                                 Matrix channel_cov, uint64_t seed)
    : patch_h_(patch_h), patch_w_(patch_w), stream_(seed) {
  const size_t pixels = static_cast<size_t>(patch_h) * patch_w;
  if (spatial_cov.rows() != pixels)
    throw_validation(Errc::kDimMismatch, "spatial covariance must cover the patch pixels");
  spatial_chol_ = cholesky(spatial_cov);
  channel_chol_ = cholesky(channel_cov);
}

ActivationTensor KroneckerSource::tensor() {
  const size_t pixels = static_cast<size_t>(patch_h_) * patch_w_;
  const size_t channels = channel_chol_.rows();
  Matrix g(pixels, channels);
  for (double& v : g.data()) v = stream_.next();
  // X = Ls * G * Lk^T has covariance spatial (x) channel.
  Matrix sg = matmul(spatial_chol_, g);
  Matrix x = matmul(sg, channel_chol_.transposed());
  std::vector<float> data(pixels * channels);
  for (size_t p = 0; p < pixels; ++p)
    for (size_t c = 0; c < channels; ++c) data[p * channels + c] = static_cast<float>(x(p, c));
  return make_tensor(patch_h_, patch_w_, static_cast<uint32_t>(channels), std::move(data));
}

std::vector<ActivationTensor> KroneckerSource::tensors(size_t count) {
  std::vector<ActivationTensor> out;
  out.reserve(count);
  for (size_t i = 0; i < count; ++i) out.push_back(tensor());
  return out;
}

// ---------------------------------------------------------------------------
// Layer chain
// ---------------------------------------------------------------------------

void LayerChainSpec::validate() const {
  if (input_h == 0 || input_w == 0 || input_c == 0)
    throw_validation(Errc::kInvalidArgument, "chain input dims must be positive");
  if (layers.empty()) throw_validation(Errc::kInvalidArgument, "chain needs at least one layer");
  uint32_t channels = input_c;
  for (const auto& layer : layers) {
    if (layer.kind == LayerKind::kConv) {
      if (layer.out_channels == 0)
        throw_validation(Errc::kInvalidArgument, "conv layer needs out_channels");
      if (layer.kernel == 0 || layer.stride == 0)
        throw_validation(Errc::kInvalidArgument, "conv kernel and stride must be positive");
      channels = layer.out_channels;
    }
    layer.codec.validate();
    if (layer.codec.block.bc > channels)
      throw_validation(Errc::kInvalidArgument, "codec block channels exceed layer channels");
  }
}

std::vector<ConvWeights> chain_weights(const LayerChainSpec& spec) {
  spec.validate();
  std::vector<ConvWeights> out;
  uint32_t channels = spec.input_c;
  for (size_t l = 0; l < spec.layers.size(); ++l) {
    const auto& layer = spec.layers[l];
    if (layer.kind == LayerKind::kIdentity) {
      out.emplace_back();
      continue;
    }
    ConvWeights w;
    w.out_channels = layer.out_channels;
    w.in_channels = channels;
    w.kh = layer.kernel;
    w.kw = layer.kernel;
    w.bias.assign(w.out_channels, 0.0);
    if (layer.weights_file) {
      ActivationTensor k = load_tensor(*layer.weights_file);
      if (k.height != w.out_channels || k.width != w.in_channels ||
          k.channels != layer.kernel * layer.kernel)
        throw_validation(Errc::kDimMismatch,
                         "weight file dims must be (out, in, kh*kw) for layer " +
                             std::to_string(l));
      w.weights.assign(k.data.begin(), k.data.end());
    } else {
      // He-scale init: std = sqrt(2 / fan_in), layer substream from the
      // chain weight seed.
      const double fan_in = static_cast<double>(w.in_channels) * layer.kernel * layer.kernel;
      const double scale = std::sqrt(2.0 / fan_in);
      GaussianStream stream(derive_seed(spec.weight_seed, l));
      w.weights.resize(static_cast<size_t>(w.out_channels) * w.in_channels * layer.kernel *
                       layer.kernel);
      for (double& v : w.weights) v = scale * stream.next();
    }
    w.validate();
    out.push_back(std::move(w));
    channels = layer.out_channels;
  }
  return out;
}

ActivationTensor conv2d(const ActivationTensor& input, const ConvWeights& w, uint32_t stride) {
  w.validate();
  if (input.channels != w.in_channels)
    throw_validation(Errc::kDimMismatch, "conv input channels mismatch");
  if (stride == 0) throw_validation(Errc::kInvalidArgument, "stride must be positive");
  const int pad_h = static_cast<int>(w.kh / 2);
  const int pad_w = static_cast<int>(w.kw / 2);
  const int64_t oh = (static_cast<int64_t>(input.height) + 2 * pad_h - w.kh) / stride + 1;
  const int64_t ow = (static_cast<int64_t>(input.width) + 2 * pad_w - w.kw) / stride + 1;
  if (oh < 1 || ow < 1)
    throw_validation(Errc::kInvalidArgument, "conv output would be empty");

  ActivationTensor out = make_zero_tensor(static_cast<uint32_t>(oh), static_cast<uint32_t>(ow),
                                          w.out_channels);
  for (uint32_t y = 0; y < out.height; ++y) {
    for (uint32_t x = 0; x < out.width; ++x) {
      for (uint32_t o = 0; o < w.out_channels; ++o) {
        double acc = w.bias[o];
        for (uint32_t ky = 0; ky < w.kh; ++ky) {
          const int iy = static_cast<int>(y * stride) - pad_h + static_cast<int>(ky);
          if (iy < 0 || iy >= static_cast<int>(input.height)) continue;
          for (uint32_t kx = 0; kx < w.kw; ++kx) {
            const int ix = static_cast<int>(x * stride) - pad_w + static_cast<int>(kx);
            if (ix < 0 || ix >= static_cast<int>(input.width)) continue;
            for (uint32_t i = 0; i < w.in_channels; ++i)
              acc += w.weights[w.index(o, i, ky, kx)] *
                     input.at(static_cast<uint32_t>(iy), static_cast<uint32_t>(ix), i);
          }
        }
        out.at(y, x, o) = static_cast<float>(acc);
      }
    }
  }
  return out;
}

ActivationTensor bn_apply(const ActivationTensor& input, const BnParams& bn) {
  bn.validate(input.channels);
  ActivationTensor out = input;
  for (uint32_t h = 0; h < out.height; ++h)
    for (uint32_t w = 0; w < out.width; ++w)
      for (uint32_t c = 0; c < out.channels; ++c)
        out.at(h, w, c) = static_cast<float>(
            bn.gamma[c] * (static_cast<double>(input.at(h, w, c)) - bn.mean[c]) / bn.std[c] +
            bn.beta[c]);
  return out;
}

namespace {

ActivationTensor layer_forward(const ChainLayerSpec& layer, const ConvWeights& w,
                               const ActivationTensor& x) {
  if (layer.kind == LayerKind::kIdentity) return x;
  ActivationTensor z = conv2d(x, w, layer.stride);
  const BnParams& bn = layer.bn ? *layer.bn : BnParams::identity(z.channels);
  return bn_apply(z, bn);
}

ActivationTensor apply_nonlinearity(const ActivationTensor& z, Nonlinearity nl) {
  if (nl == Nonlinearity::kNone) return z;
  return apply_relu(z);
}

}  // namespace

ChainCalibration calibrate_chain(const LayerChainSpec& spec,
                                 std::span<const ActivationTensor> batch, bool progressive,
                                 const std::string& model_id) {
  spec.validate();
  if (batch.empty()) throw_validation(Errc::kInvalidArgument, "empty calibration batch");
  std::vector<ConvWeights> weights = chain_weights(spec);

  ChainCalibration out;
  out.profile.model_id = model_id;
  out.profile.sample_count = batch.size();

  std::vector<ActivationTensor> current(batch.begin(), batch.end());
  for (size_t l = 0; l < spec.layers.size(); ++l) {
    const auto& layer = spec.layers[l];
    std::vector<ActivationTensor> z_batch;
    z_batch.reserve(current.size());
    for (const auto& t : current) z_batch.push_back(layer_forward(layer, weights[l], t));

    CovarianceModel model;
    ProfileEntry entry = calibrate_layer(z_batch, layer.codec, &model);
    out.covariances.push_back(model.covariance());

    std::vector<ActivationTensor> next;
    next.reserve(z_batch.size());
    for (const auto& z : z_batch) {
      if (progressive) {
        // Statistics for the next layer come from decoded outputs, exactly
        // what it will see at inference time.
        next.push_back(decode_layer(encode_layer(z, entry), entry));
      } else {
        next.push_back(apply_nonlinearity(z, layer.codec.nonlinearity));
      }
    }
    out.profile.entries.push_back(std::move(entry));
    current = std::move(next);
  }
  return out;
}

namespace {

// Entropy (bits/value) and exact payload accounting for one container,
// recovered from the stream itself so it double-checks the encoder.
struct StreamMeasurement {
  SymbolHistogram histogram;
  uint64_t payload_bits = 0;
  uint64_t header_bits = 0;
  uint64_t values = 0;
  uint64_t symbols = 0;
};

void measure_container(const CompressedActivation& ca, StreamMeasurement& m) {
  std::vector<int32_t> symbols = vlc_decode(ca.payload, ca.codebook, ca.symbol_count);
  m.histogram.add_all(symbols);
  m.payload_bits += ca.payload_bits;
  m.header_bits += ca.header_bits;
  m.values += ca.value_count();
  m.symbols += ca.symbol_count;
}

RateDistortionPoint point_from_measurement(const StreamMeasurement& m, int64_t layer,
                                           double step, double sse) {
  RateDistortionPoint p;
  p.layer = layer;
  p.step = step;
  const double values = static_cast<double>(m.values);
  p.entropy_bits = entropy(m.histogram) * static_cast<double>(m.symbols) / values;
  p.huffman_bits = static_cast<double>(m.payload_bits) / values;
  p.header_bits = static_cast<double>(m.header_bits) / values;
  p.mse = sse / values;
  return p;
}

}  // namespace

ChainRunResult run_chain(const LayerChainSpec& spec, const ActivationTensor& input,
                         const CalibrationProfile& profile, bool folded) {
  spec.validate();
  if (profile.entries.size() != spec.layers.size())
    throw_validation(Errc::kDimMismatch, "profile does not match chain spec");
  std::vector<ConvWeights> weights = chain_weights(spec);

  ChainRunResult out;
  ActivationTensor x = input;
  ActivationTensor clean = input;
  for (size_t l = 0; l < spec.layers.size(); ++l) {
    const auto& layer = spec.layers[l];
    const ProfileEntry& entry = profile.entries[l];

    ActivationTensor z = layer_forward(layer, weights[l], x);
    CompressedActivation ca;
    if (folded && layer.kind == LayerKind::kConv && layer.codec.use_klt &&
        layer.codec.block.bw == 1 && layer.codec.block.bh == 1 &&
        layer.codec.nonlinearity != Nonlinearity::kBeforeEncoder) {
      const BnParams& bn = layer.bn ? *layer.bn : BnParams::identity(layer.out_channels);
      ConvWeights fw = fold(weights[l], bn, entry.transform);
      ActivationTensor y = conv2d(x, fw, layer.stride);
      ca = encode_transformed(y, entry);
    } else {
      ca = encode_layer(z, entry);
    }
    ActivationTensor decoded = decode_layer(ca, entry);
    ActivationTensor reference = apply_nonlinearity(z, layer.codec.nonlinearity);

    StreamMeasurement m;
    measure_container(ca, m);
    double sse = tensor_mse(decoded, reference) * static_cast<double>(decoded.value_count());
    out.layers.push_back(point_from_measurement(m, static_cast<int64_t>(l), entry.quant.step, sse));

    x = std::move(decoded);
    ActivationTensor clean_z = layer_forward(layer, weights[l], clean);
    clean = apply_nonlinearity(clean_z, layer.codec.nonlinearity);
  }
  out.output_mse = tensor_mse(x, clean);
  for (auto& p : out.layers) p.output_mse = out.output_mse;
  out.output = std::move(x);
  return out;
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

namespace {

RateDistortionPoint sweep_point(std::span<const ActivationTensor> data,
                                const LayerCodecConfig& base, double grid_value,
                                bool grid_is_rates, int64_t layer) {
  LayerCodecConfig config = base;
  config.target_rate.reset();
  config.explicit_step.reset();
  config.bitwidth.reset();
  if (grid_is_rates)
    config.target_rate = grid_value;
  else
    config.explicit_step = grid_value;

  ProfileEntry entry = calibrate_layer(data, config);
  StreamMeasurement m;
  double sse = 0.0;
  for (const auto& t : data) {
    CompressedActivation ca = encode_layer(t, entry);
    measure_container(ca, m);
    ActivationTensor decoded = decode_layer(ca, entry);
    ActivationTensor reference = apply_nonlinearity(t, config.nonlinearity);
    sse += tensor_mse(decoded, reference) * static_cast<double>(decoded.value_count());
  }
  return point_from_measurement(m, layer, entry.quant.step, sse);
}

}  // namespace

std::vector<RateDistortionPoint> rd_sweep(std::span<const ActivationTensor> data,
                                          const LayerCodecConfig& base,
                                          std::span<const double> grid, bool grid_is_rates,
                                          int threads) {
  if (grid.empty()) throw_validation(Errc::kInvalidArgument, "empty sweep grid");
  if (data.empty()) throw_validation(Errc::kInvalidArgument, "empty sweep data");
  std::vector<RateDistortionPoint> points(grid.size());
  parallel_for(grid.size(), threads, [&](size_t i) {
    points[i] = sweep_point(data, base, grid[i], grid_is_rates, 0);
  });
  return points;
}

std::vector<RateDistortionPoint> rd_sweep_chain(const LayerChainSpec& spec,
                                                std::span<const ActivationTensor> batch,
                                                std::span<const double> rates,
                                                bool progressive) {
  if (rates.empty()) throw_validation(Errc::kInvalidArgument, "empty sweep grid");
  std::vector<RateDistortionPoint> points;
  for (double rate : rates) {
    LayerChainSpec swept = spec;
    for (auto& layer : swept.layers) {
      layer.codec.target_rate = rate;
      layer.codec.explicit_step.reset();
      layer.codec.bitwidth.reset();
    }
    ChainCalibration calib = calibrate_chain(swept, batch, progressive);
    // Aggregate the whole batch through the chain at this rate.
    std::vector<RateDistortionPoint> acc;
    for (const auto& t : batch) {
      ChainRunResult run = run_chain(swept, t, calib.profile, false);
      if (acc.empty()) {
        acc = run.layers;
      } else {
        for (size_t l = 0; l < acc.size(); ++l) {
          acc[l].entropy_bits += run.layers[l].entropy_bits;
          acc[l].huffman_bits += run.layers[l].huffman_bits;
          acc[l].header_bits += run.layers[l].header_bits;
          acc[l].mse += run.layers[l].mse;
          *acc[l].output_mse += *run.layers[l].output_mse;
        }
      }
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (auto& p : acc) {
      p.entropy_bits *= inv;
      p.huffman_bits *= inv;
      p.header_bits *= inv;
      p.mse *= inv;
      *p.output_mse *= inv;
      points.push_back(p);
    }
  }
  return points;
}

double coding_gain_bits(const Matrix& sigma) {
  if (sigma.rows() != sigma.cols() || sigma.rows() == 0)
    throw_validation(Errc::kDimMismatch, "coding gain needs a square covariance");
  const size_t n = sigma.rows();
  EigenDecomposition eig = eigendecompose(sigma);
  double log_diag = 0.0;
  double log_eig = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double d = sigma(i, i);
    const double l = eig.eigenvalues[i];
    if (!(l > 0.0)) return std::numeric_limits<double>::infinity();  // singular, flagged
    if (!(d > 0.0)) return std::numeric_limits<double>::infinity();
    log_diag += std::log2(d);
    log_eig += std::log2(l);
  }
  return (log_diag - log_eig) / (2.0 * static_cast<double>(n));
}

double component_entropy_bits(std::span<const ActivationTensor> data,
                              const ProfileEntry& entry) {
  if (data.empty()) throw_validation(Errc::kInvalidArgument, "no data");
  const uint32_t kept = entry.config.kept(entry.n);
  std::vector<SymbolHistogram> position_hist(kept);
  uint64_t values = 0;
  uint64_t blocks = 0;
  for (const auto& t : data) {
    CompressedActivation ca = encode_layer(t, entry);
    std::vector<int32_t> symbols = vlc_decode(ca.payload, ca.codebook, ca.symbol_count);
    for (size_t i = 0; i < symbols.size(); ++i)
      position_hist[i % kept].add(symbols[i]);
    values += ca.value_count();
    blocks += ca.symbol_count / kept;
  }
  double bits_per_block = 0.0;
  for (const auto& h : position_hist) bits_per_block += entropy(h);
  return bits_per_block * static_cast<double>(blocks) / static_cast<double>(values);
}

double rate_at_mse(std::span<const RateDistortionPoint> points, double target_mse) {
  if (points.empty()) throw_validation(Errc::kInvalidArgument, "rate_at_mse: no points");
  std::vector<RateDistortionPoint> sorted(points.begin(), points.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.mse < b.mse; });
  if (target_mse <= sorted.front().mse) return sorted.front().huffman_bits;
  if (target_mse >= sorted.back().mse) return sorted.back().huffman_bits;
  for (size_t i = 1; i < sorted.size(); ++i) {
    if (target_mse <= sorted[i].mse) {
      const auto& a = sorted[i - 1];
      const auto& b = sorted[i];
      const double span = std::log(b.mse) - std::log(a.mse);
      if (span <= 0.0) return a.huffman_bits;
      const double t = (std::log(target_mse) - std::log(a.mse)) / span;
      return a.huffman_bits + t * (b.huffman_bits - a.huffman_bits);
    }
  }
  return sorted.back().huffman_bits;
}

std::vector<ShapeStudyResult> block_shape_study(std::span<const ActivationTensor> data,
                                                std::span<const BlockShape> shapes,
                                                const LayerCodecConfig& base,
                                                std::span<const double> steps, int threads) {
  if (shapes.empty()) throw_validation(Errc::kInvalidArgument, "no shapes given");
  const uint32_t n = shapes.front().n();
  for (const auto& s : shapes)
    if (s.n() != n)
      throw_validation(Errc::kInvalidArgument, "block shapes must share the same size n");
  std::vector<ShapeStudyResult> out;
  for (const auto& shape : shapes) {
    LayerCodecConfig config = base;
    config.block = shape;
    out.push_back({shape, rd_sweep(data, config, steps, false, threads)});
  }
  return out;
}

std::vector<EnergyRatioRow> energy_ratio_report(const CalibrationProfile& profile) {
  std::vector<EnergyRatioRow> rows;
  for (size_t l = 0; l < profile.entries.size(); ++l) {
    std::vector<double> spectrum = profile.entries[l].transform.spectrum;
    std::sort(spectrum.begin(), spectrum.end(), std::greater<double>());
    for (double fraction : kEnergyFractions) {
      EnergyRatioRow row;
      row.layer = l;
      row.fraction = fraction;
      row.count = energy_ratio(spectrum, fraction);
      row.ratio = static_cast<double>(row.count) / static_cast<double>(spectrum.size());
      rows.push_back(row);
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string report_to_csv(std::span<const RateDistortionPoint> points) {
  std::string out = "layer,step,entropy_bits,huffman_bits,header_bits,mse,output_mse\n";
  for (const auto& p : points) {
    out += std::to_string(p.layer);
    out += ',';
    out += format_double(p.step);
    out += ',';
    out += format_double(p.entropy_bits);
    out += ',';
    out += format_double(p.huffman_bits);
    out += ',';
    out += format_double(p.header_bits);
    out += ',';
    out += format_double(p.mse);
    out += ',';
    if (p.output_mse) out += format_double(*p.output_mse);
    out += '\n';
  }
  return out;
}

std::string report_to_json(std::span<const RateDistortionPoint> points) {
  json arr = json::array();
  for (const auto& p : points) {
    json row;
    row["layer"] = p.layer;
    row["step"] = p.step;
    row["entropy_bits"] = p.entropy_bits;
    row["huffman_bits"] = p.huffman_bits;
    row["header_bits"] = p.header_bits;
    row["mse"] = p.mse;
    row["output_mse"] = p.output_mse ? json(*p.output_mse) : json(nullptr);
    arr.push_back(std::move(row));
  }
  return arr.dump(2) + "\n";
}

std::vector<RateDistortionPoint> parse_report_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line))
    throw_validation(Errc::kInvalidArgument, "empty report");
  if (line != "layer,step,entropy_bits,huffman_bits,header_bits,mse,output_mse")
    throw_validation(Errc::kInvalidArgument, "unexpected report header: " + line);
  std::vector<RateDistortionPoint> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    size_t start = 0;
    for (;;) {
      size_t comma = line.find(',', start);
      if (comma == std::string::npos) {
        fields.push_back(line.substr(start));
        break;
      }
      fields.push_back(line.substr(start, comma - start));
      start = comma + 1;
    }
    if (fields.size() != 7)
      throw_validation(Errc::kInvalidArgument, "malformed report row: " + line);
    RateDistortionPoint p;
    p.layer = std::stoll(fields[0]);
    p.step = std::stod(fields[1]);
    p.entropy_bits = std::stod(fields[2]);
    p.huffman_bits = std::stod(fields[3]);
    p.header_bits = std::stod(fields[4]);
    p.mse = std::stod(fields[5]);
    if (!fields[6].empty()) p.output_mse = std::stod(fields[6]);
    out.push_back(p);
  }
  return out;
}

std::vector<RateDistortionPoint> parse_report_json(const std::string& text) {
  json arr = json::parse(text);
  if (!arr.is_array()) throw_validation(Errc::kInvalidArgument, "report JSON must be an array");
  std::vector<RateDistortionPoint> out;
  for (const auto& row : arr) {
    RateDistortionPoint p;
    p.layer = row.at("layer").get<int64_t>();
    p.step = row.at("step").get<double>();
    p.entropy_bits = row.at("entropy_bits").get<double>();
    p.huffman_bits = row.at("huffman_bits").get<double>();
    p.header_bits = row.at("header_bits").get<double>();
    p.mse = row.at("mse").get<double>();
    if (!row.at("output_mse").is_null()) p.output_mse = row.at("output_mse").get<double>();
    out.push_back(p);
  }
  return out;
}

void emit_report(std::span<const RateDistortionPoint> points, const std::string& format,
                 const std::string& path) {
  std::string text;
  if (format == "csv") {
    text = report_to_csv(points);
  } else if (format == "json") {
    text = report_to_json(points);
  } else {
    throw_validation(Errc::kInvalidArgument, "unknown report format: " + format);
  }
  write_file_atomic(path, {reinterpret_cast<const uint8_t*>(text.data()), text.size()});
}

double tensor_mse(const ActivationTensor& a, const ActivationTensor& b) {
  if (a.height != b.height || a.width != b.width || a.channels != b.channels)
    throw_validation(Errc::kDimMismatch, "tensor_mse dims mismatch");
  double sse = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
    sse += d * d;
  }
  return sse / static_cast<double>(a.data.size());
}

// ---------------------------------------------------------------------------
// JSON specs (chain + sources + codec config)
// ---------------------------------------------------------------------------

namespace {

std::vector<double> bn_field(const json& j, const char* key, uint32_t channels, double fallback) {
  if (!j.contains(key)) return std::vector<double>(channels, fallback);
  const json& v = j.at(key);
  if (v.is_number()) return std::vector<double>(channels, v.get<double>());
  auto vec = v.get<std::vector<double>>();
  if (vec.size() != channels)
    throw_validation(Errc::kInvalidArgument, std::string("bn field ") + key + " has wrong length");
  return vec;
}

LayerCodecConfig codec_config_from(const json& j) {
  LayerCodecConfig cfg;
  if (j.contains("block")) {
    auto b = j.at("block").get<std::vector<uint32_t>>();
    if (b.size() != 3) throw_validation(Errc::kInvalidArgument, "codec block must be [bw, bh, bc]");
    cfg.block = BlockShape{b[0], b[1], b[2]};
  }
  int selectors = 0;
  if (j.contains("rate")) {
    cfg.target_rate = j.at("rate").get<double>();
    ++selectors;
  }
  if (j.contains("step")) {
    cfg.explicit_step = j.at("step").get<double>();
    ++selectors;
  }
  if (j.contains("bits")) {
    cfg.bitwidth = j.at("bits").get<int>();
    ++selectors;
  }
  if (selectors != 1)
    throw_validation(Errc::kInvalidArgument,
                     "codec config needs exactly one of rate, step, bits");
  if (j.contains("clip_mult")) cfg.clip_mult = j.at("clip_mult").get<double>();
  if (j.contains("truncate")) cfg.truncate = j.at("truncate").get<uint32_t>();
  if (j.contains("transform")) {
    const std::string t = j.at("transform").get<std::string>();
    if (t == "float32")
      cfg.precision = TransformPrecision::kFloat32;
    else if (t == "int8")
      cfg.precision = TransformPrecision::kInt8;
    else
      throw_validation(Errc::kInvalidArgument, "transform must be float32 or int8");
  }
  if (j.contains("use_klt")) cfg.use_klt = j.at("use_klt").get<bool>();
  if (j.contains("embed_transform")) cfg.embed_transform = j.at("embed_transform").get<bool>();
  if (j.contains("nonlinearity")) {
    const std::string nl = j.at("nonlinearity").get<std::string>();
    if (nl == "none")
      cfg.nonlinearity = Nonlinearity::kNone;
    else if (nl == "after-decoder")
      cfg.nonlinearity = Nonlinearity::kAfterDecoder;
    else if (nl == "before-encoder")
      cfg.nonlinearity = Nonlinearity::kBeforeEncoder;
    else
      throw_validation(Errc::kInvalidArgument, "unknown nonlinearity: " + nl);
  }
  return cfg;
}

json codec_config_to(const LayerCodecConfig& cfg) {
  json j;
  j["block"] = {cfg.block.bw, cfg.block.bh, cfg.block.bc};
  if (cfg.target_rate) j["rate"] = *cfg.target_rate;
  if (cfg.explicit_step) j["step"] = *cfg.explicit_step;
  if (cfg.bitwidth) j["bits"] = *cfg.bitwidth;
  j["clip_mult"] = cfg.clip_mult;
  j["truncate"] = cfg.truncate;
  j["transform"] = cfg.precision == TransformPrecision::kInt8 ? "int8" : "float32";
  j["use_klt"] = cfg.use_klt;
  j["embed_transform"] = cfg.embed_transform;
  switch (cfg.nonlinearity) {
    case Nonlinearity::kNone: j["nonlinearity"] = "none"; break;
    case Nonlinearity::kAfterDecoder: j["nonlinearity"] = "after-decoder"; break;
    case Nonlinearity::kBeforeEncoder: j["nonlinearity"] = "before-encoder"; break;
  }
  return j;
}

}  // namespace

LayerChainSpec chain_spec_from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw_validation(Errc::kInvalidArgument, std::string("chain spec JSON: ") + e.what());
  }
  try {
    LayerChainSpec spec;
    const json& in = j.at("input");
    spec.input_h = in.at("height").get<uint32_t>();
    spec.input_w = in.at("width").get<uint32_t>();
    spec.input_c = in.at("channels").get<uint32_t>();
    if (j.contains("weight_seed")) spec.weight_seed = j.at("weight_seed").get<uint64_t>();
    uint32_t channels = spec.input_c;
    for (const json& jl : j.at("layers")) {
      ChainLayerSpec layer;
      const std::string type = jl.value("type", "conv");
      if (type == "conv") {
        layer.kind = LayerKind::kConv;
        layer.kernel = jl.value("kernel", 3u);
        layer.out_channels = jl.at("out_channels").get<uint32_t>();
        layer.stride = jl.value("stride", 1u);
        if (jl.contains("weights_file"))
          layer.weights_file = jl.at("weights_file").get<std::string>();
        channels = layer.out_channels;
        if (jl.contains("bn")) {
          BnParams bn;
          bn.gamma = bn_field(jl.at("bn"), "gamma", channels, 1.0);
          bn.beta = bn_field(jl.at("bn"), "beta", channels, 0.0);
          bn.mean = bn_field(jl.at("bn"), "mean", channels, 0.0);
          bn.std = bn_field(jl.at("bn"), "std", channels, 1.0);
          layer.bn = std::move(bn);
        }
      } else if (type == "identity") {
        layer.kind = LayerKind::kIdentity;
      } else {
        throw_validation(Errc::kInvalidArgument, "unknown layer type: " + type);
      }
      layer.codec = codec_config_from(jl.at("codec"));
      spec.layers.push_back(std::move(layer));
    }
    spec.validate();
    return spec;
  } catch (const json::exception& e) {
    throw_validation(Errc::kInvalidArgument, std::string("chain spec JSON: ") + e.what());
  }
}

std::string chain_spec_to_json(const LayerChainSpec& spec) {
  json j;
  j["input"] = {{"height", spec.input_h}, {"width", spec.input_w}, {"channels", spec.input_c}};
  j["weight_seed"] = spec.weight_seed;
  json layers = json::array();
  for (const auto& layer : spec.layers) {
    json jl;
    if (layer.kind == LayerKind::kIdentity) {
      jl["type"] = "identity";
    } else {
      jl["type"] = "conv";
      jl["kernel"] = layer.kernel;
      jl["out_channels"] = layer.out_channels;
      jl["stride"] = layer.stride;
      if (layer.weights_file) jl["weights_file"] = *layer.weights_file;
      if (layer.bn) {
        jl["bn"] = {{"gamma", layer.bn->gamma},
                    {"beta", layer.bn->beta},
                    {"mean", layer.bn->mean},
                    {"std", layer.bn->std}};
      }
    }
    jl["codec"] = codec_config_to(layer.codec);
    layers.push_back(std::move(jl));
  }
  j["layers"] = std::move(layers);
  return j.dump(2) + "\n";
}

LayerChainSpec load_chain_spec(const std::string& path) {
  std::vector<uint8_t> bytes = read_file(path);
  return chain_spec_from_json(std::string(bytes.begin(), bytes.end()));
}

LayerCodecConfig codec_config_from_json(const std::string& json_text) {
  try {
    return codec_config_from(json::parse(json_text));
  } catch (const json::exception& e) {
    throw_validation(Errc::kInvalidArgument, std::string("codec config JSON: ") + e.what());
  }
}

namespace {

Matrix covariance_from_json(const json& j, size_t n) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "identity") {
    return equicorrelated(n, 0.0, j.value("variance", 1.0));
  }
  if (kind == "equicorrelated") {
    return equicorrelated(n, j.at("rho").get<double>(), j.value("variance", 1.0));
  }
  if (kind == "diagonal") {
    auto v = j.at("variances").get<std::vector<double>>();
    if (v.size() != n)
      throw_validation(Errc::kInvalidArgument, "diagonal variances length mismatch");
    return diagonal_matrix(v);
  }
  if (kind == "spectrum") {
    auto v = j.at("values").get<std::vector<double>>();
    if (v.size() != n) throw_validation(Errc::kInvalidArgument, "spectrum length mismatch");
    return rotated_spectrum(v, j.value("rotation_seed", uint64_t{17}));
  }
  throw_validation(Errc::kInvalidArgument, "unknown covariance kind: " + kind);
}

}  // namespace

std::vector<ActivationTensor> tensors_from_source_json(const std::string& json_text,
                                                       std::optional<uint64_t> seed_override) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw_validation(Errc::kInvalidArgument, std::string("source spec JSON: ") + e.what());
  }
  try {
    const std::string type = j.value("type", "synthetic");
    if (type == "tensor-files") {
      std::vector<ActivationTensor> out;
      for (const auto& f : j.at("files")) out.push_back(load_tensor(f.get<std::string>()));
      if (out.empty()) throw_validation(Errc::kInvalidArgument, "no tensor files listed");
      return out;
    }
    if (type != "synthetic" && type != "kronecker")
      throw_validation(Errc::kInvalidArgument, "unknown source type: " + type);

    const json& dims = j.at("dims");
    const uint32_t h = dims.at("height").get<uint32_t>();
    const uint32_t w = dims.at("width").get<uint32_t>();
    const uint32_t c = dims.at("channels").get<uint32_t>();
    const size_t count = j.value("count", size_t{16});
    const uint64_t seed = seed_override ? *seed_override : j.value("seed", uint64_t{1});

    if (type == "kronecker") {
      const size_t pixels = static_cast<size_t>(h) * w;
      Matrix spatial = covariance_from_json(j.at("spatial"), pixels);
      Matrix channel = covariance_from_json(j.at("channel"), c);
      KroneckerSource src(h, w, std::move(spatial), std::move(channel), seed);
      return src.tensors(count);
    }

    BlockShape shape{1, 1, c};
    if (j.contains("block")) {
      auto b = j.at("block").get<std::vector<uint32_t>>();
      if (b.size() != 3) throw_validation(Errc::kInvalidArgument, "block must be [bw, bh, bc]");
      shape = BlockShape{b[0], b[1], b[2]};
    }
    const size_t n = shape.n();
    std::vector<double> mu(n, 0.0);
    if (j.contains("mean")) {
      const json& m = j.at("mean");
      if (m.is_number()) {
        std::fill(mu.begin(), mu.end(), m.get<double>());
      } else {
        mu = m.get<std::vector<double>>();
        if (mu.size() != n) throw_validation(Errc::kInvalidArgument, "mean length mismatch");
      }
    }
    Matrix sigma = covariance_from_json(j.at("covariance"), n);
    SyntheticSource src(std::move(sigma), std::move(mu), seed);
    return src.tensors(count, h, w, c, shape);
  } catch (const json::exception& e) {
    throw_validation(Errc::kInvalidArgument, std::string("source spec JSON: ") + e.what());
  }
}

}  // namespace atc::harness
