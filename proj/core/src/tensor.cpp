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

#include "atc/tensor.hpp"

#include <cmath>

#include "atc/bytes.hpp"

namespace atc {

namespace {

constexpr char kMagic[4] = {'A', 'T', 'C', 'T'};
constexpr uint16_t kVersion = 1;
constexpr uint16_t kDtypeF32 = 0;

void check_dims(uint32_t height, uint32_t width, uint32_t channels) {
  if (height == 0 || width == 0 || channels == 0)
    throw_validation(Errc::kInvalidArgument, "tensor dimensions must be positive");
}

}  // namespace

ActivationTensor make_tensor(uint32_t height, uint32_t width, uint32_t channels,
                             std::vector<float> data) {
  check_dims(height, width, channels);
  size_t expect = static_cast<size_t>(height) * width * channels;
  if (data.size() != expect)
    throw_validation(Errc::kDimMismatch,
                     "tensor payload length " + std::to_string(data.size()) +
                         " does not match dims (" + std::to_string(expect) + ")");
  for (float v : data) {
    if (!std::isfinite(v))
      throw_validation(Errc::kNonFinite, "tensor contains a non-finite value");
  }
  return ActivationTensor{height, width, channels, std::move(data)};
}

ActivationTensor make_zero_tensor(uint32_t height, uint32_t width, uint32_t channels) {
  check_dims(height, width, channels);
  size_t n = static_cast<size_t>(height) * width * channels;
  return ActivationTensor{height, width, channels, std::vector<float>(n, 0.0f)};
}

BlockSequence partition(const ActivationTensor& t, const BlockShape& shape,
                        PaddingPolicy padding) {
  check_dims(t.height, t.width, t.channels);
  if (shape.bw == 0 || shape.bh == 0 || shape.bc == 0)
    throw_validation(Errc::kInvalidArgument, "block shape extents must be positive");
  if (shape.bc > t.channels)
    throw_validation(Errc::kInvalidArgument, "block channel extent exceeds tensor channels");
  if (!padding.channel_means.empty() && padding.channel_means.size() != t.channels)
    throw_validation(Errc::kDimMismatch, "padding means must have one entry per channel");

  BlockSequence seq;
  seq.height = t.height;
  seq.width = t.width;
  seq.channels = t.channels;
  seq.shape = shape;
  seq.padding = std::move(padding);
  seq.blocks.reserve(seq.block_count());

  const uint32_t n = shape.n();
  const auto& means = seq.padding.channel_means;
  for (uint32_t gh = 0; gh < seq.grid_h(); ++gh) {
    for (uint32_t gw = 0; gw < seq.grid_w(); ++gw) {
      for (uint32_t gc = 0; gc < seq.grid_c(); ++gc) {
        std::vector<double> block(n);
        size_t k = 0;
        for (uint32_t dy = 0; dy < shape.bh; ++dy) {
          for (uint32_t dx = 0; dx < shape.bw; ++dx) {
            for (uint32_t dc = 0; dc < shape.bc; ++dc, ++k) {
              uint32_t h = gh * shape.bh + dy;
              uint32_t w = gw * shape.bw + dx;
              uint32_t c = gc * shape.bc + dc;
              if (c >= t.channels) {
                block[k] = 0.0;
              } else if (h >= t.height || w >= t.width) {
                block[k] = means.empty() ? 0.0 : means[c];
              } else {
                block[k] = t.at(h, w, c);
              }
            }
          }
        }
        seq.blocks.push_back(std::move(block));
      }
    }
  }
  return seq;
}

ActivationTensor reassemble(const BlockSequence& seq) {
  check_dims(seq.height, seq.width, seq.channels);
  if (seq.blocks.size() != seq.block_count())
    throw_validation(Errc::kDimMismatch,
                     "block count " + std::to_string(seq.blocks.size()) +
                         " inconsistent with grid (" + std::to_string(seq.block_count()) + ")");
  const uint32_t n = seq.shape.n();
  ActivationTensor out = make_zero_tensor(seq.height, seq.width, seq.channels);

  size_t b = 0;
  for (uint32_t gh = 0; gh < seq.grid_h(); ++gh) {
    for (uint32_t gw = 0; gw < seq.grid_w(); ++gw) {
      for (uint32_t gc = 0; gc < seq.grid_c(); ++gc, ++b) {
        const auto& block = seq.blocks[b];
        if (block.size() != n)
          throw_validation(Errc::kDimMismatch, "block " + std::to_string(b) + " has wrong length");
        size_t k = 0;
        for (uint32_t dy = 0; dy < seq.shape.bh; ++dy) {
          for (uint32_t dx = 0; dx < seq.shape.bw; ++dx) {
            for (uint32_t dc = 0; dc < seq.shape.bc; ++dc, ++k) {
              uint32_t h = gh * seq.shape.bh + dy;
              uint32_t w = gw * seq.shape.bw + dx;
              uint32_t c = gc * seq.shape.bc + dc;
              if (h < seq.height && w < seq.width && c < seq.channels)
                out.at(h, w, c) = static_cast<float>(block[k]);
            }
          }
        }
      }
    }
  }
  return out;
}

std::vector<uint8_t> tensor_to_bytes(const ActivationTensor& t) {
  check_dims(t.height, t.width, t.channels);
  ByteWriter w;
  w.magic(kMagic);
  w.u16(kVersion);
  w.u16(kDtypeF32);
  w.u32(t.height);
  w.u32(t.width);
  w.u32(t.channels);
  for (float v : t.data) w.f32(v);
  return w.take();
}

ActivationTensor tensor_from_bytes(std::span<const uint8_t> bytes) {
  ByteReader r(bytes);
  if (!r.check_magic(kMagic))
    throw_validation(Errc::kBadMagic, "not an ATCT tensor file");
  uint16_t version = r.u16();
  if (version != kVersion)
    throw_validation(Errc::kBadVersion, "unsupported ATCT version " + std::to_string(version));
  uint16_t dtype = r.u16();
  if (dtype != kDtypeF32)
    throw_validation(Errc::kBadDtype, "unsupported ATCT dtype " + std::to_string(dtype));
  uint32_t height = r.u32();
  uint32_t width = r.u32();
  uint32_t channels = r.u32();
  check_dims(height, width, channels);
  if (static_cast<uint64_t>(height) * width * channels > (uint64_t{1} << 31))
    throw_validation(Errc::kInvalidArgument, "ATCT dimensions exceed the supported size");
  size_t count = static_cast<size_t>(height) * width * channels;
  if (r.remaining() < count * 4)
    throw_validation(Errc::kTruncated, "ATCT payload truncated");
  std::vector<float> data(count);
  for (size_t i = 0; i < count; ++i) data[i] = r.f32();
  return make_tensor(height, width, channels, std::move(data));
}

ActivationTensor load_tensor(const std::string& path) {
  return tensor_from_bytes(read_file(path));
}

void save_tensor(const ActivationTensor& t, const std::string& path) {
  write_file_atomic(path, tensor_to_bytes(t));
}

}  // namespace atc
