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

#include "atc/vlc.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <string>

namespace atc {

namespace {

// Index of the escape pseudo-symbol in the builder's leaf ordering: it sorts
// after every regular symbol.
constexpr size_t kEscapeOrder = ~size_t{0};
constexpr uint32_t kMaxCodeLength = 63;
constexpr uint32_t kEscapeRawBits = 32;

}  // namespace

void SymbolHistogram::add(int32_t symbol, uint64_t count) {
  if (count == 0) return;
  counts_[symbol] += count;
  total_ += count;
}

void SymbolHistogram::add_all(std::span<const int32_t> symbols) {
  for (int32_t s : symbols) add(s);
}

int32_t SymbolHistogram::min_symbol() const {
  if (counts_.empty()) throw_validation(Errc::kInvalidArgument, "empty histogram");
  return counts_.begin()->first;
}

int32_t SymbolHistogram::max_symbol() const {
  if (counts_.empty()) throw_validation(Errc::kInvalidArgument, "empty histogram");
  return counts_.rbegin()->first;
}

uint64_t SymbolHistogram::count(int32_t symbol) const {
  auto it = counts_.find(symbol);
  return it == counts_.end() ? 0 : it->second;
}

double entropy(const SymbolHistogram& h) {
  if (h.empty()) throw_validation(Errc::kInvalidArgument, "entropy of empty histogram");
  const double total = static_cast<double>(h.total());
  double bits = 0.0;
  for (const auto& [sym, count] : h.counts()) {
    if (count == 0) continue;
    const double p = static_cast<double>(count) / total;
    bits -= p * std::log2(p);
  }
  return bits;
}

// ---------------------------------------------------------------------------
// Codebook
// ---------------------------------------------------------------------------

struct HuffmanCodebook::DecodeTables {
  // Canonically sorted coded symbols; escape is represented by the sentinel
  // order slot after all regular symbols.
  std::vector<int32_t> sorted_symbols;   // regular symbols in canonical order
  std::vector<bool> is_escape;           // parallel to sorted_symbols
  std::vector<uint64_t> first_code;      // per length 1..max
  std::vector<uint32_t> first_index;     // per length, into sorted_symbols
  std::vector<uint32_t> count;           // per length
  std::vector<Code> codes;               // per symbol offset (span entries)
  Code escape;
};

uint32_t HuffmanCodebook::length(int32_t symbol) const {
  if (lengths_.empty()) return 0;
  if (symbol < min_symbol_ || symbol > max_symbol()) return 0;
  return lengths_[static_cast<size_t>(symbol - min_symbol_)];
}

HuffmanCodebook HuffmanCodebook::from_lengths(int32_t min_symbol, std::vector<uint8_t> lengths,
                                              uint8_t escape_length) {
  HuffmanCodebook book;
  book.min_symbol_ = min_symbol;
  book.lengths_ = std::move(lengths);
  book.escape_length_ = escape_length;
  if (book.lengths_.empty())
    throw_validation(Errc::kInvalidArgument, "codebook needs at least one symbol slot");

  uint32_t coded = 0;
  for (size_t i = 0; i < book.lengths_.size(); ++i) {
    if (book.lengths_[i] > kMaxCodeLength)
      throw_validation(Errc::kInvalidArgument, "code length overflow");
    book.max_length_ = std::max<uint32_t>(book.max_length_, book.lengths_[i]);
    if (book.lengths_[i] > 0) ++coded;
  }
  book.max_length_ = std::max<uint32_t>(book.max_length_, escape_length);
  // Degenerate one-symbol alphabet: a single coded slot would demand length
  // zero, which the length table cannot express; it is flagged separately.
  if (coded == 0 && escape_length == 0) {
    // All lengths zero: only legal as the single-symbol case with exactly
    // one slot in the table.
    if (book.lengths_.size() != 1)
      throw_validation(Errc::kInvalidArgument, "length table has no coded symbols");
    book.single_ = true;
    book.single_value_ = book.min_symbol_;
    book.max_length_ = 0;
  }
  book.build_tables();
  return book;
}

void HuffmanCodebook::build_tables() {
  auto tables = std::make_shared<DecodeTables>();
  // Collect (length, order) pairs in canonical order: by length, then by
  // symbol value, escape after everything.
  struct Entry {
    uint32_t len;
    size_t order;  // offset into lengths_, kEscapeOrder for escape
  };
  std::vector<Entry> entries;
  for (size_t i = 0; i < lengths_.size(); ++i)
    if (lengths_[i] > 0) entries.push_back({lengths_[i], i});
  if (escape_length_ > 0) entries.push_back({escape_length_, kEscapeOrder});

  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.len != b.len) return a.len < b.len;
    return a.order < b.order;
  });

  tables->codes.resize(lengths_.size());
  if (!entries.empty()) {
    const uint32_t max_len = entries.back().len;
    tables->first_code.assign(max_len + 1, 0);
    tables->first_index.assign(max_len + 1, 0);
    tables->count.assign(max_len + 1, 0);

    uint64_t code = 0;
    uint32_t prev_len = entries.front().len;
    // Kraft sum scaled by 2^63: a complete prefix code sums to exactly 2^63,
    // and any prefix exceeding that is already invalid.
    constexpr uint64_t kKraftOne = uint64_t{1} << 63;
    uint64_t kraft = 0;
    for (size_t k = 0; k < entries.size(); ++k) {
      const Entry& e = entries[k];
      if (k > 0) {
        ++code;
        code <<= (e.len - prev_len);
      }
      prev_len = e.len;
      if (tables->count[e.len] == 0) {
        tables->first_code[e.len] = code;
        tables->first_index[e.len] = static_cast<uint32_t>(tables->sorted_symbols.size());
      }
      ++tables->count[e.len];
      const uint64_t term = uint64_t{1} << (63 - e.len);
      if (kraft > kKraftOne - term)
        throw_validation(Errc::kInvalidArgument, "code lengths violate Kraft equality");
      kraft += term;
      Code c{code, e.len};
      if (e.order == kEscapeOrder) {
        tables->escape = c;
        tables->sorted_symbols.push_back(0);
        tables->is_escape.push_back(true);
      } else {
        tables->codes[e.order] = c;
        tables->sorted_symbols.push_back(min_symbol_ + static_cast<int32_t>(e.order));
        tables->is_escape.push_back(false);
      }
    }
    if (kraft != kKraftOne)
      throw_validation(Errc::kInvalidArgument, "code lengths violate Kraft equality");
  }
  tables_ = std::move(tables);
}

void HuffmanCodebook::serialize(ByteWriter& w) const {
  w.i32(min_symbol_);
  w.u32(static_cast<uint32_t>(lengths_.size()));
  for (uint8_t len : lengths_) w.u8(len);
  w.u8(escape_length_);
}

HuffmanCodebook HuffmanCodebook::deserialize(ByteReader& r) {
  int32_t min_symbol = r.i32();
  uint32_t span = r.u32();
  if (span == 0) throw_validation(Errc::kCorruptStream, "codebook with empty symbol span");
  if (span > (1u << 24)) throw_validation(Errc::kCorruptStream, "codebook span too large");
  std::vector<uint8_t> lengths(span);
  for (auto& len : lengths) len = r.u8();
  uint8_t escape_len = r.u8();
  return from_lengths(min_symbol, std::move(lengths), escape_len);
}

bool HuffmanCodebook::operator==(const HuffmanCodebook& other) const {
  return min_symbol_ == other.min_symbol_ && lengths_ == other.lengths_ &&
         escape_length_ == other.escape_length_ && single_ == other.single_ &&
         single_value_ == other.single_value_;
}

std::optional<HuffmanCodebook::Code> HuffmanCodebook::code_for(int32_t symbol) const {
  if (single_) {
    if (symbol == single_value_) return Code{0, 0};
    return std::nullopt;
  }
  const uint32_t len = length(symbol);
  if (len == 0) return std::nullopt;
  return decode_tables().codes[static_cast<size_t>(symbol - min_symbol_)];
}

std::optional<HuffmanCodebook::Code> HuffmanCodebook::escape_code() const {
  if (escape_length_ == 0) return std::nullopt;
  return decode_tables().escape;
}

// ---------------------------------------------------------------------------
// Builder
// ---------------------------------------------------------------------------

HuffmanCodebook build_codebook(const SymbolHistogram& h, bool with_escape) {
  if (h.empty()) throw_validation(Errc::kInvalidArgument, "cannot build codebook: empty histogram");

  struct Leaf {
    size_t order;  // kEscapeOrder for the escape pseudo-symbol
    uint64_t count;
  };
  std::vector<Leaf> leaves;
  const int32_t min_sym = h.min_symbol();
  const int32_t max_sym = h.max_symbol();
  const size_t span = static_cast<size_t>(static_cast<int64_t>(max_sym) - min_sym + 1);
  for (const auto& [sym, count] : h.counts())
    if (count > 0) leaves.push_back({static_cast<size_t>(sym - min_sym), count});
  if (with_escape) leaves.push_back({kEscapeOrder, 1});

  std::vector<uint8_t> lengths(span, 0);
  uint8_t escape_length = 0;

  if (leaves.size() == 1) {
    // Single-symbol alphabet: zero-length code, payload empty; the symbol
    // count is carried externally.
    return HuffmanCodebook::from_lengths(min_sym + static_cast<int32_t>(leaves[0].order),
                                         std::vector<uint8_t>{0}, 0);
  }

  // Standard heap construction. Nodes are ranked by (count, sequence); leaf
  // sequences follow symbol order (escape last) and internal nodes take
  // increasing sequence numbers after all leaves, making ties deterministic.
  struct Node {
    uint64_t count;
    uint64_t seq;
    int left = -1;   // node indices, -1 for leaf
    int right = -1;
    size_t leaf_order = 0;
  };
  std::vector<Node> nodes;
  nodes.reserve(leaves.size() * 2);
  auto leaf_seq = [&](size_t order) {
    return order == kEscapeOrder ? static_cast<uint64_t>(span) : static_cast<uint64_t>(order);
  };
  for (const Leaf& leaf : leaves)
    nodes.push_back({leaf.count, leaf_seq(leaf.order), -1, -1, leaf.order});

  auto cmp = [&](int a, int b) {
    if (nodes[a].count != nodes[b].count) return nodes[a].count > nodes[b].count;
    return nodes[a].seq > nodes[b].seq;
  };
  std::priority_queue<int, std::vector<int>, decltype(cmp)> heap(cmp);
  for (int i = 0; i < static_cast<int>(nodes.size()); ++i) heap.push(i);

  uint64_t next_seq = span + 1;
  while (heap.size() > 1) {
    int a = heap.top();
    heap.pop();
    int b = heap.top();
    heap.pop();
    nodes.push_back({nodes[a].count + nodes[b].count, next_seq++, a, b, 0});
    heap.push(static_cast<int>(nodes.size()) - 1);
  }

  // Depth-first depth assignment.
  std::vector<std::pair<int, uint32_t>> stack{{heap.top(), 0}};
  while (!stack.empty()) {
    auto [idx, depth] = stack.back();
    stack.pop_back();
    const Node& node = nodes[idx];
    if (node.left < 0) {
      if (depth > kMaxCodeLength)
        throw_numeric(Errc::kOverflow, "huffman code length exceeds 63 bits");
      if (node.leaf_order == kEscapeOrder)
        escape_length = static_cast<uint8_t>(depth);
      else
        lengths[node.leaf_order] = static_cast<uint8_t>(depth);
    } else {
      stack.push_back({node.left, depth + 1});
      stack.push_back({node.right, depth + 1});
    }
  }

  return HuffmanCodebook::from_lengths(min_sym, std::move(lengths), escape_length);
}

// ---------------------------------------------------------------------------
// Encode / decode
// ---------------------------------------------------------------------------

namespace {

void encode_into(BitWriter& writer, std::span<const int32_t> symbols,
                 const HuffmanCodebook& book) {
  const auto escape = book.escape_code();
  for (int32_t s : symbols) {
    if (auto code = book.code_for(s)) {
      writer.put(code->value, code->length);
    } else if (escape) {
      writer.put(escape->value, escape->length);
      writer.put(static_cast<uint32_t>(s), kEscapeRawBits);
    } else {
      throw_validation(Errc::kNoCode, "symbol " + std::to_string(s) + " has no code");
    }
  }
}

}  // namespace

BitStream vlc_encode(std::span<const int32_t> symbols, const HuffmanCodebook& book) {
  BitWriter writer;
  encode_into(writer, symbols, book);
  return writer.take();
}

std::vector<int32_t> vlc_decode(BitReader& reader, const HuffmanCodebook& book,
                                size_t symbol_count) {
  std::vector<int32_t> out;
  out.reserve(symbol_count);
  if (book.is_single_symbol()) {
    out.assign(symbol_count, book.single_symbol_value());
    return out;
  }
  const auto& t = book.decode_tables();
  const uint32_t max_len = book.max_length();
  for (size_t i = 0; i < symbol_count; ++i) {
    uint64_t code = 0;
    uint32_t len = 0;
    int32_t symbol = 0;
    bool found = false;
    while (len < max_len) {
      code = (code << 1) | (reader.read_bit() ? 1u : 0u);
      ++len;
      if (len >= t.count.size() || t.count[len] == 0) continue;
      if (code >= t.first_code[len] &&
          code - t.first_code[len] < t.count[len]) {
        const uint32_t slot = t.first_index[len] + static_cast<uint32_t>(code - t.first_code[len]);
        if (t.is_escape[slot]) {
          symbol = static_cast<int32_t>(static_cast<uint32_t>(reader.read_bits(kEscapeRawBits)));
        } else {
          symbol = t.sorted_symbols[slot];
        }
        found = true;
        break;
      }
    }
    if (!found) throw_validation(Errc::kCorruptStream, "invalid code word in stream");
    out.push_back(symbol);
  }
  return out;
}

std::vector<int32_t> vlc_decode(const BitStream& stream, const HuffmanCodebook& book,
                                size_t symbol_count) {
  BitReader reader(stream);
  auto out = vlc_decode(reader, book, symbol_count);
  reader.check_zero_padding();
  return out;
}

uint64_t vlc_cost_bits(std::span<const int32_t> symbols, const HuffmanCodebook& book) {
  uint64_t bits = 0;
  const auto escape = book.escape_code();
  for (int32_t s : symbols) {
    if (auto code = book.code_for(s)) {
      bits += code->length;
    } else if (escape) {
      bits += escape->length + kEscapeRawBits;
    } else {
      throw_validation(Errc::kNoCode, "symbol " + std::to_string(s) + " has no code");
    }
  }
  return bits;
}

double average_rate(const HuffmanCodebook& book, const SymbolHistogram& h) {
  if (h.empty()) throw_validation(Errc::kInvalidArgument, "average_rate: empty histogram");
  const double total = static_cast<double>(h.total());
  double bits = 0.0;
  const auto escape = book.escape_code();
  for (const auto& [sym, count] : h.counts()) {
    if (count == 0) continue;
    double len;
    if (auto code = book.code_for(sym)) {
      len = code->length;
    } else if (escape) {
      len = escape->length + kEscapeRawBits;
    } else {
      throw_validation(Errc::kNoCode, "average_rate: symbol has no code");
    }
    bits += static_cast<double>(count) * len;
  }
  return bits / total;
}

TreeBalance tree_balance(const HuffmanCodebook& book) {
  TreeBalance out;
  uint32_t min_len = ~0u;
  uint32_t max_len = 0;
  std::vector<uint64_t> hist;
  auto note = [&](uint32_t len) {
    min_len = std::min(min_len, len);
    max_len = std::max(max_len, len);
    if (hist.size() <= len) hist.resize(len + 1, 0);
    ++hist[len];
  };
  if (book.is_single_symbol()) {
    note(0);
  } else {
    for (size_t i = 0; i < book.lengths().size(); ++i)
      if (book.lengths()[i] > 0) note(book.lengths()[i]);
    if (book.escape_length() > 0) note(book.escape_length());
  }
  out.max_len = max_len;
  out.min_len = min_len == ~0u ? 0 : min_len;
  out.length_histogram = std::move(hist);
  return out;
}

}  // namespace atc
