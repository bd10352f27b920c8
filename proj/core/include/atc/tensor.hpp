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

// Activation tensors, deterministic block partitioning, and the ATCT tensor
// file format.
//
// Memory layout is channel-major at each spatial site:
//   index(h, w, c) = (h * width + w) * channels + c
// so a 1x1xC block is a contiguous slice of the payload.

#ifndef ATC_TENSOR_HPP
#define ATC_TENSOR_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "atc/common.hpp"

namespace atc {

struct ActivationTensor {
  uint32_t height = 0;
  uint32_t width = 0;
  uint32_t channels = 0;
  std::vector<float> data;  // height * width * channels, finite

  size_t index(uint32_t h, uint32_t w, uint32_t c) const {
    return (static_cast<size_t>(h) * width + w) * channels + c;
  }
  float at(uint32_t h, uint32_t w, uint32_t c) const { return data[index(h, w, c)]; }
  float& at(uint32_t h, uint32_t w, uint32_t c) { return data[index(h, w, c)]; }
  size_t value_count() const {
    return static_cast<size_t>(height) * width * channels;
  }

  bool operator==(const ActivationTensor& other) const = default;
};

// Validates dimensions, payload length, and finiteness.
ActivationTensor make_tensor(uint32_t height, uint32_t width, uint32_t channels,
                             std::vector<float> data);
// Same checks, zero-filled payload.
ActivationTensor make_zero_tensor(uint32_t height, uint32_t width, uint32_t channels);

struct BlockShape {
  uint32_t bw = 1;
  uint32_t bh = 1;
  uint32_t bc = 1;

  uint32_t n() const { return bw * bh * bc; }
  bool operator==(const BlockShape& other) const = default;
};

// Values substituting out-of-range positions when a block overhangs the
// tensor. Spatial overhang at channel c takes channel_means[c] (zero when no
// means are supplied); channel overhang beyond the tensor's channel count is
// always zero.
struct PaddingPolicy {
  std::vector<float> channel_means;
};

struct BlockSequence {
  std::vector<std::vector<double>> blocks;  // each of length shape.n()
  uint32_t height = 0;                      // origin dims, for exact cropping
  uint32_t width = 0;
  uint32_t channels = 0;
  BlockShape shape;
  PaddingPolicy padding;

  uint32_t grid_h() const { return (height + shape.bh - 1) / shape.bh; }
  uint32_t grid_w() const { return (width + shape.bw - 1) / shape.bw; }
  uint32_t grid_c() const { return (channels + shape.bc - 1) / shape.bc; }
  size_t block_count() const {
    return static_cast<size_t>(grid_h()) * grid_w() * grid_c();
  }
};

// Splits the tensor into non-overlapping bh x bw x bc blocks. Block order is
// row-major over the block grid with the channel axis fastest
// (h-block, then w-block, then c-block); within a block elements follow the
// tensor layout (dy, dx, dc with dc fastest). Both orders are deterministic.
BlockSequence partition(const ActivationTensor& t, const BlockShape& shape,
                        PaddingPolicy padding = {});

// Exact inverse of partition for unmodified blocks; padding slots are dropped.
ActivationTensor reassemble(const BlockSequence& blocks);

// ATCT tensor file format (all integers little-endian):
//   bytes 0-3  magic "ATCT"
//   u16        version  (1)
//   u16        dtype    (0 = f32 little-endian)
//   u32        height, width, channels
//   payload    height*width*channels f32, layout as documented above
ActivationTensor load_tensor(const std::string& path);
void save_tensor(const ActivationTensor& t, const std::string& path);

std::vector<uint8_t> tensor_to_bytes(const ActivationTensor& t);
ActivationTensor tensor_from_bytes(std::span<const uint8_t> bytes);

}  // namespace atc

#endif  // ATC_TENSOR_HPP
