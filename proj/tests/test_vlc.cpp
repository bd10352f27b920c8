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

#include <cmath>

#include "atc/random.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace atc;

namespace {

SymbolHistogram hist_of(std::initializer_list<std::pair<int32_t, uint64_t>> counts) {
  SymbolHistogram h;
  for (auto [s, c] : counts) h.add(s, c);
  return h;
}

SymbolHistogram random_histogram(CounterRng& rng, uint64_t& c, int max_span) {
  SymbolHistogram h;
  const int span = 1 + static_cast<int>(rng.raw(c++) % max_span);
  const int32_t base = static_cast<int32_t>(rng.raw(c++) % 64) - 32;
  for (int s = 0; s < span; ++s) {
    if (rng.uniform(c++) < 0.3) continue;  // holes in the range
    h.add(base + s, 1 + rng.raw(c++) % 1000);
  }
  if (h.empty()) h.add(base, 1);
  return h;
}

}  // namespace

TEST_SUITE_BEGIN("vlc");

TEST_CASE("entropy") {
  CHECK(entropy(hist_of({{0, 1}, {1, 1}})) == doctest::Approx(1.0));
  CHECK(entropy(hist_of({{7, 42}})) == doctest::Approx(0.0));
  CHECK(entropy(hist_of({{0, 2}, {1, 1}, {2, 1}})) == doctest::Approx(1.5));
}

TEST_CASE("build_codebook: dyadic distributions are coded at entropy") {
  SUBCASE("four equiprobable symbols -> all lengths 2") {
    auto book = build_codebook(hist_of({{0, 5}, {1, 5}, {2, 5}, {3, 5}}));
    for (int32_t s = 0; s < 4; ++s) CHECK(book.length(s) == 2);
  }
  SUBCASE("(1/2, 1/4, 1/4) -> lengths (1, 2, 2), rate = entropy = 1.5") {
    auto h = hist_of({{0, 2}, {1, 1}, {2, 1}});
    auto book = build_codebook(h);
    CHECK(book.length(0) == 1);
    CHECK(book.length(1) == 2);
    CHECK(book.length(2) == 2);
    CHECK(average_rate(book, h) == doctest::Approx(1.5));
  }
}

TEST_CASE("huffman bound holds on random histograms") {
  CounterRng rng(1234);
  uint64_t c = 0;
  for (int trial = 0; trial < 200; ++trial) {
    SymbolHistogram h = random_histogram(rng, c, 48);
    auto book = build_codebook(h);
    const double rate = average_rate(book, h);
    const double ent = entropy(h);
    CHECK(rate >= ent - 1e-12);
    CHECK(rate < ent + 1.0);
  }
}

TEST_CASE("encode/decode") {
  SUBCASE("empty symbol list -> empty stream") {
    auto book = build_codebook(hist_of({{0, 1}, {1, 1}}));
    BitStream s = vlc_encode({}, book);
    CHECK(s.bit_count == 0);
    CHECK(s.bytes.empty());
    CHECK(vlc_decode(s, book, 0).empty());
  }
  SUBCASE("single-symbol alphabet costs zero bits") {
    auto book = build_codebook(hist_of({{5, 10}}));
    CHECK(book.is_single_symbol());
    std::vector<int32_t> symbols(100, 5);
    BitStream s = vlc_encode(symbols, book);
    CHECK(s.bit_count == 0);
    CHECK(vlc_decode(s, book, 100) == symbols);
  }
  SUBCASE("known canonical packing, MSB first") {
    // lengths: a=1, b=2, c=2 -> canonical codes a=0, b=10, c=11
    auto book = build_codebook(hist_of({{0, 2}, {1, 1}, {2, 1}}));
    std::vector<int32_t> symbols{0, 1, 2, 0};
    BitStream s = vlc_encode(symbols, book);
    CHECK(s.bit_count == 6);
    REQUIRE(s.bytes.size() == 1);
    CHECK(s.bytes[0] == 0x58);  // 0 10 11 0 + two zero pad bits
    CHECK(vlc_decode(s, book, symbols.size()) == symbols);
  }
}

TEST_CASE("round-trip fuzzing over random codebooks") {
  CounterRng rng(777);
  uint64_t c = 0;
  for (int trial = 0; trial < 300; ++trial) {
    SymbolHistogram h = random_histogram(rng, c, 40);
    auto book = build_codebook(h, /*with_escape=*/trial % 2 == 1);
    std::vector<int32_t> alphabet;
    for (const auto& [sym, count] : h.counts()) alphabet.push_back(sym);
    std::vector<int32_t> symbols(rng.raw(c++) % 300);
    for (auto& s : symbols) s = alphabet[rng.raw(c++) % alphabet.size()];
    BitStream stream = vlc_encode(symbols, book);
    CHECK(vlc_decode(stream, book, symbols.size()) == symbols);
    CHECK(stream.bit_count == vlc_cost_bits(symbols, book));
  }
}

TEST_CASE("escape carries symbols outside the calibrated alphabet") {
  auto book = build_codebook(hist_of({{0, 100}, {1, 50}, {-1, 50}}), /*with_escape=*/true);
  CHECK(book.has_escape());
  std::vector<int32_t> symbols{0, 1, 99999, -1, -123456, 0};
  BitStream s = vlc_encode(symbols, book);
  CHECK(vlc_decode(s, book, symbols.size()) == symbols);

  SUBCASE("without escape the unseen symbol is an error") {
    auto plain = build_codebook(hist_of({{0, 100}, {1, 50}, {-1, 50}}));
    std::vector<int32_t> bad{0, 99999};
    try {
      vlc_encode(bad, plain);
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::kNoCode);
    }
  }
}

TEST_CASE("canonical determinism and length-only serialization") {
  CounterRng rng(31337);
  uint64_t c = 0;
  for (int trial = 0; trial < 50; ++trial) {
    SymbolHistogram h = random_histogram(rng, c, 32);
    auto a = build_codebook(h, trial % 2 == 0);
    auto b = build_codebook(h, trial % 2 == 0);
    CHECK(a == b);

    std::vector<int32_t> alphabet;
    for (const auto& [sym, count] : h.counts()) alphabet.push_back(sym);
    std::vector<int32_t> symbols(64);
    for (auto& s : symbols) s = alphabet[rng.raw(c++) % alphabet.size()];
    CHECK(vlc_encode(symbols, a).bytes == vlc_encode(symbols, b).bytes);

    // Lengths alone reconstruct the codebook (canonical property).
    ByteWriter w;
    a.serialize(w);
    ByteReader r(w.data());
    auto restored = HuffmanCodebook::deserialize(r);
    CHECK(restored == a);
    CHECK(vlc_encode(symbols, restored).bytes == vlc_encode(symbols, a).bytes);
  }
}

TEST_CASE("average_rate") {
  SUBCASE("uniform over three symbols -> 5/3 bits vs entropy log2(3)") {
    auto h = hist_of({{0, 1}, {1, 1}, {2, 1}});
    auto book = build_codebook(h);
    CHECK(average_rate(book, h) == doctest::Approx(5.0 / 3.0));
    CHECK(entropy(h) == doctest::Approx(std::log2(3.0)));
  }
}

TEST_CASE("tree_balance") {
  SUBCASE("uniform 4-symbol tree is perfectly balanced") {
    auto b = tree_balance(build_codebook(hist_of({{0, 1}, {1, 1}, {2, 1}, {3, 1}})));
    CHECK(b.max_len == 2);
    CHECK(b.min_len == 2);
    CHECK(b.length_histogram[2] == 4);
  }
  SUBCASE("skewed distribution unbalances the tree") {
    auto b = tree_balance(build_codebook(hist_of({{0, 2}, {1, 1}, {2, 1}})));
    CHECK(b.max_len == 2);
    CHECK(b.min_len == 1);
  }
}

TEST_CASE("stream integrity errors") {
  auto book = build_codebook(hist_of({{0, 3}, {1, 2}, {2, 1}}));
  std::vector<int32_t> symbols{0, 1, 2, 1, 0, 0, 2};
  BitStream s = vlc_encode(symbols, book);

  SUBCASE("exhausted stream") {
    CHECK_THROWS_AS(vlc_decode(s, book, symbols.size() + 20), Error);
  }
  SUBCASE("nonzero padding") {
    BitStream bad = s;
    REQUIRE(bad.bit_count % 8 != 0);
    bad.bytes.back() |= 1;  // flip the last pad bit
    try {
      vlc_decode(bad, book, symbols.size());
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::kCorruptStream);
    }
  }
  SUBCASE("invalid length table violates Kraft equality") {
    CHECK_THROWS_AS(HuffmanCodebook::from_lengths(0, {1, 1, 1}, 0), Error);
  }
}

TEST_SUITE_END();
