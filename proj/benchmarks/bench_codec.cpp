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

#include "atc/harness.hpp"
#include "benchmark/benchmark.h"

namespace {

struct CodecFixture {
  std::vector<atc::ActivationTensor> data;
  atc::ProfileEntry entry;

  explicit CodecFixture(uint32_t channels) {
    atc::harness::SyntheticSource src(atc::harness::equicorrelated(channels, 0.9),
                                      std::vector<double>(channels, 0.0), 17);
    data = src.tensors(4, 16, 16, channels, atc::BlockShape{1, 1, channels});
    atc::LayerCodecConfig cfg;
    cfg.block = atc::BlockShape{1, 1, channels};
    cfg.target_rate = 4.0;
    cfg.nonlinearity = atc::Nonlinearity::kNone;
    entry = atc::calibrate_layer(data, cfg);
  }
};

void BM_EncodeLayer(benchmark::State& state) {
  CodecFixture f(static_cast<uint32_t>(state.range(0)));
  for (auto _ : state) {
    auto ca = atc::encode_layer(f.data[0], f.entry);
    benchmark::DoNotOptimize(ca);
  }
  state.SetItemsProcessed(state.iterations() * f.data[0].value_count());
}
BENCHMARK(BM_EncodeLayer)->Arg(16)->Arg(64);

void BM_DecodeLayer(benchmark::State& state) {
  CodecFixture f(static_cast<uint32_t>(state.range(0)));
  auto ca = atc::encode_layer(f.data[0], f.entry);
  for (auto _ : state) {
    auto t = atc::decode_layer(ca, f.entry);
    benchmark::DoNotOptimize(t);
  }
  state.SetItemsProcessed(state.iterations() * f.data[0].value_count());
}
BENCHMARK(BM_DecodeLayer)->Arg(16)->Arg(64);

void BM_CalibrateLayer(benchmark::State& state) {
  CodecFixture f(static_cast<uint32_t>(state.range(0)));
  atc::LayerCodecConfig cfg = f.entry.config;
  for (auto _ : state) {
    auto entry = atc::calibrate_layer(f.data, cfg);
    benchmark::DoNotOptimize(entry);
  }
}
BENCHMARK(BM_CalibrateLayer)->Arg(16)->Arg(64);

}  // namespace
