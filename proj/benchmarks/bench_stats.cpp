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

#include "atc/stats.hpp"

#include "atc/harness.hpp"
#include "benchmark/benchmark.h"

namespace {

void BM_CovarianceAccumulate(benchmark::State& state) {
  const size_t n = static_cast<size_t>(state.range(0));
  atc::harness::SyntheticSource src(atc::harness::equicorrelated(n, 0.5),
                                    std::vector<double>(n, 0.0), 5);
  auto samples = src.generate(1024);
  for (auto _ : state) {
    atc::CovarianceModel m(n);
    for (const auto& s : samples) m.add(s);
    benchmark::DoNotOptimize(m);
  }
  state.SetItemsProcessed(state.iterations() * samples.size());
}
BENCHMARK(BM_CovarianceAccumulate)->Arg(16)->Arg(64)->Arg(256);

void BM_JacobiEigendecompose(benchmark::State& state) {
  const size_t n = static_cast<size_t>(state.range(0));
  std::vector<double> spectrum(n);
  for (size_t i = 0; i < n; ++i) spectrum[i] = 1.0 / static_cast<double>(i + 1);
  atc::Matrix sigma = atc::harness::rotated_spectrum(spectrum, 9);
  for (auto _ : state) {
    auto eig = atc::eigendecompose(sigma);
    benchmark::DoNotOptimize(eig);
  }
}
BENCHMARK(BM_JacobiEigendecompose)->Arg(8)->Arg(64)->Arg(128);

void BM_StepForRateExact(benchmark::State& state) {
  for (auto _ : state) {
    double step = atc::step_for_rate_exact(4.0, 1.0);
    benchmark::DoNotOptimize(step);
  }
}
BENCHMARK(BM_StepForRateExact);

}  // namespace
