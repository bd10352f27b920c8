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

// MSB-first bit packing. Bit i of the stream lives at byte[i/8], mask
// 0x80 >> (i%8); pad bits up to the byte boundary are zero.

#ifndef ATC_BITSTREAM_HPP
#define ATC_BITSTREAM_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "atc/common.hpp"

namespace atc {

struct BitStream {
  std::vector<uint8_t> bytes;
  uint64_t bit_count = 0;

  bool operator==(const BitStream& other) const = default;
};

class BitWriter {
 public:
  // Appends the low `len` bits of `value`, most significant first.
  void put(uint64_t value, uint32_t len) {
    for (uint32_t i = len; i-- > 0;) {
      if (stream_.bit_count % 8 == 0) stream_.bytes.push_back(0);
      if ((value >> i) & 1u)
        stream_.bytes.back() |= static_cast<uint8_t>(0x80u >> (stream_.bit_count % 8));
      ++stream_.bit_count;
    }
  }

  const BitStream& stream() const { return stream_; }
  BitStream take() { return std::move(stream_); }

 private:
  BitStream stream_;
};

class BitReader {
 public:
  explicit BitReader(std::span<const uint8_t> bytes, uint64_t bit_count)
      : bytes_(bytes), bit_count_(bit_count) {
    if (bit_count_ > 8 * static_cast<uint64_t>(bytes_.size()))
      throw_validation(Errc::kInvalidArgument, "bit count exceeds byte buffer");
  }
  explicit BitReader(const BitStream& s) : BitReader(s.bytes, s.bit_count) {}

  bool read_bit() {
    if (pos_ >= bit_count_)
      throw_validation(Errc::kCorruptStream, "bit stream exhausted");
    bool bit = (bytes_[pos_ / 8] >> (7 - pos_ % 8)) & 1u;
    ++pos_;
    return bit;
  }

  uint64_t read_bits(uint32_t len) {
    uint64_t v = 0;
    for (uint32_t i = 0; i < len; ++i) v = (v << 1) | (read_bit() ? 1u : 0u);
    return v;
  }

  uint64_t position() const { return pos_; }
  uint64_t remaining() const { return bit_count_ - pos_; }

  // All bits from the cursor to the end of the last byte must be zero.
  void check_zero_padding() const {
    if (bit_count_ - pos_ >= 8)
      throw_validation(Errc::kCorruptStream, "trailing data after payload");
    for (uint64_t i = pos_; i < 8 * static_cast<uint64_t>(bytes_.size()); ++i) {
      if ((bytes_[i / 8] >> (7 - i % 8)) & 1u)
        throw_validation(Errc::kCorruptStream, "nonzero padding bits");
    }
  }

 private:
  std::span<const uint8_t> bytes_;
  uint64_t bit_count_;
  uint64_t pos_ = 0;
};

}  // namespace atc

#endif  // ATC_BITSTREAM_HPP
