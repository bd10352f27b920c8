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

// Symbol histograms, canonical Huffman codebooks, and bit-exact
// variable-length encode/decode over quantizer bin indices.

#ifndef ATC_VLC_HPP
#define ATC_VLC_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "atc/bitstream.hpp"
#include "atc/bytes.hpp"

namespace atc {

class SymbolHistogram {
 public:
  SymbolHistogram() = default;

  void add(int32_t symbol, uint64_t count = 1);
  void add_all(std::span<const int32_t> symbols);

  uint64_t total() const { return total_; }
  bool empty() const { return total_ == 0; }
  int32_t min_symbol() const;
  int32_t max_symbol() const;
  uint64_t count(int32_t symbol) const;
  const std::map<int32_t, uint64_t>& counts() const { return counts_; }

 private:
  std::map<int32_t, uint64_t> counts_;
  uint64_t total_ = 0;
};

// Shannon entropy in bits/symbol; zero-count symbols contribute nothing.
double entropy(const SymbolHistogram& h);

// Canonical prefix code over a contiguous symbol range plus an optional
// escape code. Only code lengths are stored; code values are recomputed by
// assigning codes in (length, symbol) order with the escape sorting last.
// A single-symbol alphabet gets length 0 and an empty payload.
class HuffmanCodebook {
 public:
  HuffmanCodebook() = default;

  int32_t min_symbol() const { return min_symbol_; }
  int32_t max_symbol() const { return min_symbol_ + static_cast<int32_t>(lengths_.size()) - 1; }
  uint32_t length(int32_t symbol) const;  // 0 = symbol has no code
  uint32_t escape_length() const { return escape_length_; }
  bool has_escape() const { return escape_length_ > 0; }
  bool has_code(int32_t symbol) const { return length(symbol) > 0 || single_symbol(symbol); }
  const std::vector<uint8_t>& lengths() const { return lengths_; }

  // True when the alphabet is the degenerate one-symbol case (code length 0).
  bool is_single_symbol() const { return single_; }
  int32_t single_symbol_value() const { return single_value_; }

  uint32_t max_length() const { return max_length_; }

  // Wire format: i32 symbol_min, u32 symbol_span, symbol_span+1 length
  // bytes with the escape length last (0 = uncoded).
  void serialize(ByteWriter& w) const;
  static HuffmanCodebook deserialize(ByteReader& r);

  // Construction from per-symbol lengths (canonical codes are implied).
  static HuffmanCodebook from_lengths(int32_t min_symbol, std::vector<uint8_t> lengths,
                                      uint8_t escape_length);

  bool operator==(const HuffmanCodebook& other) const;

  struct Code {
    uint64_t value = 0;
    uint32_t length = 0;
  };
  std::optional<Code> code_for(int32_t symbol) const;
  std::optional<Code> escape_code() const;

  struct DecodeTables;
  const DecodeTables& decode_tables() const { return *tables_; }

 private:
  bool single_symbol(int32_t symbol) const { return single_ && symbol == single_value_; }
  void build_tables();

  int32_t min_symbol_ = 0;
  std::vector<uint8_t> lengths_;
  uint8_t escape_length_ = 0;
  bool single_ = false;
  int32_t single_value_ = 0;
  uint32_t max_length_ = 0;
  std::shared_ptr<const DecodeTables> tables_;
};

// Optimal prefix code for the histogram; heap ties broken by
// (count, symbol order) so equal inputs build identical codebooks. When
// `with_escape` is set, a reserved escape symbol with count 1 joins the
// alphabet; unseen symbols are then encodable as escape + 32-bit raw value.
HuffmanCodebook build_codebook(const SymbolHistogram& h, bool with_escape = false);

BitStream vlc_encode(std::span<const int32_t> symbols, const HuffmanCodebook& book);
std::vector<int32_t> vlc_decode(const BitStream& stream, const HuffmanCodebook& book,
                                size_t symbol_count);
// Decode from an open reader (used when the payload is embedded in a
// container); does not validate padding.
std::vector<int32_t> vlc_decode(BitReader& reader, const HuffmanCodebook& book,
                                size_t symbol_count);

// Exact bit cost of a symbol sequence under the codebook (escapes included).
uint64_t vlc_cost_bits(std::span<const int32_t> symbols, const HuffmanCodebook& book);

// Expected code length sum p_s * len_s over the histogram, bits/symbol.
double average_rate(const HuffmanCodebook& book, const SymbolHistogram& h);

struct TreeBalance {
  uint32_t max_len = 0;
  uint32_t min_len = 0;
  std::vector<uint64_t> length_histogram;  // index = code length
};

TreeBalance tree_balance(const HuffmanCodebook& book);

}  // namespace atc

#endif  // ATC_VLC_HPP
