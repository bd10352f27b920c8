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

#include "atc/quant.hpp"
#include "atc/random.hpp"
#include "benchmark/benchmark.h"

namespace {

// Quantized-Gaussian symbol stream of the kind the codec produces.
std::vector<int32_t> gaussian_symbols(size_t count, double step) {
  atc::GaussianStream g(7);
  atc::QuantizerSpec spec = atc::make_quantizer(step, 8.0);
  std::vector<int32_t> symbols(count);
  for (auto& s : symbols) s = atc::quantize_one(g.next(), spec);
  return symbols;
}

void BM_HuffmanBuild(benchmark::State& state) {
  auto symbols = gaussian_symbols(1 << 16, 0.1);
  atc::SymbolHistogram h;
  h.add_all(symbols);
  for (auto _ : state) {
    auto book = atc::build_codebook(h, true);
    benchmark::DoNotOptimize(book);
  }
}
BENCHMARK(BM_HuffmanBuild);

void BM_VlcEncode(benchmark::State& state) {
  auto symbols = gaussian_symbols(static_cast<size_t>(state.range(0)), 0.25);
  atc::SymbolHistogram h;
  h.add_all(symbols);
  auto book = atc::build_codebook(h, true);
  for (auto _ : state) {
    auto stream = atc::vlc_encode(symbols, book);
    benchmark::DoNotOptimize(stream);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_VlcEncode)->Range(1 << 10, 1 << 18);

void BM_VlcDecode(benchmark::State& state) {
  auto symbols = gaussian_symbols(static_cast<size_t>(state.range(0)), 0.25);
  atc::SymbolHistogram h;
  h.add_all(symbols);
  auto book = atc::build_codebook(h, true);
  auto stream = atc::vlc_encode(symbols, book);
  for (auto _ : state) {
    auto out = atc::vlc_decode(stream, book, symbols.size());
    benchmark::DoNotOptimize(out);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_VlcDecode)->Range(1 << 10, 1 << 18);

}  // namespace
