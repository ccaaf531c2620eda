// Copyright (c) 2026, The signpipe authors. All rights reserved.
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

// Serial reference kernels against their OpenMP counterparts, plus whole-pipeline runs.
//   signpipe_bench --benchmark_filter=Normalize

#include <benchmark/benchmark.h>

#include <numeric>
#include <random>

#include "signpipe/extractor.hpp"
#include "signpipe/pipeline.hpp"
#include "signpipe/posepost.hpp"
#include "support/fixtures.hpp"

using namespace signpipe;
namespace sp = signpipe::testing;

namespace {

posepost::LandmarkClip big_clip(std::size_t frames) {
    posepost::LandmarkClip clip(frames, 543, posepost::channels_for_count(4));
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0, 1);
    for (auto& v : clip.data) v = u(rng);
    return clip;
}

void BM_NormalizeSerial(benchmark::State& state) {
    const auto clip = big_clip(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(posepost::reference::unit_bbox_normalize(clip, {}));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_NormalizeParallel(benchmark::State& state) {
    const auto clip = big_clip(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(posepost::unit_bbox_normalize(clip, {}));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_MaskSerial(benchmark::State& state) {
    const auto clip = big_clip(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(posepost::reference::mask_invisible(clip, 0.5));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_MaskParallel(benchmark::State& state) {
    const auto clip = big_clip(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(posepost::mask_invisible(clip, 0.5));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

std::vector<std::int64_t> frame_ids(benchmark::State& state) {
    std::vector<std::int64_t> frames(static_cast<std::size_t>(state.range(0)));
    std::iota(frames.begin(), frames.end(), 0);
    return frames;
}

void BM_SyntheticSerial(benchmark::State& state) {
    const auto frames = frame_ids(state);
    for (auto _ : state) benchmark::DoNotOptimize(extractor::reference::synthetic_block(7, "clip", frames, 85, 4));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_SyntheticParallel(benchmark::State& state) {
    const auto frames = frame_ids(state);
    for (auto _ : state) benchmark::DoNotOptimize(extractor::synthetic_block(7, "clip", frames, 85, 4));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_Pipeline(benchmark::State& state) {
    sp::TempDir dir;
    sp::write_corpus(dir / "corpus", {.segments = 100, .segment_s = 2.56, .segments_per_video = 10});
    auto tree = sp::pose_job_tree(dir / "corpus", dir / "out", static_cast<int>(state.range(0)));
    tree["runtime"]["resume"] = false;
    const auto cfg = config::job_from_tree(tree);
    const auto registries = pipeline::builtin_registries();
    for (auto _ : state) benchmark::DoNotOptimize(pipeline::execute_job(cfg, registries));
    state.SetItemsProcessed(state.iterations() * 100);
}

}  // namespace

BENCHMARK(BM_NormalizeSerial)->Arg(64)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_NormalizeParallel)->Arg(64)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MaskSerial)->Arg(64)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MaskParallel)->Arg(64)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SyntheticSerial)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SyntheticParallel)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Pipeline)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
