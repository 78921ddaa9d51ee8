#include <benchmark/benchmark.h>

#include "gazespiral/fixation.hpp"
#include "gazespiral/query.hpp"
#include "gazespiral/slitscan.hpp"
#include "gazespiral/synthetic.hpp"

using namespace gazespiral;

namespace {

void BM_PatchDescriptor(benchmark::State& state) {
  const Image frame = synth::render_texture(synth::gallery_paintings()[2], 320, 240);
  const int patch = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(extract_feature(frame, 0.4, 0.6, patch));
}
BENCHMARK(BM_PatchDescriptor)->Arg(32)->Arg(64)->Arg(128);

void BM_DetectFixations(benchmark::State& state) {
  synth::SceneOptions o;
  o.frame_count = static_cast<int>(state.range(0));
  const auto rec = synth::drift_recording("d", o).recording;
  for (auto _ : state) benchmark::DoNotOptimize(detect_fixations(rec));
}
BENCHMARK(BM_DetectFixations)->Arg(250)->Arg(2500)->Unit(benchmark::kMillisecond);

void BM_ExtractSequence(benchmark::State& state) {
  synth::SceneOptions o;
  o.frame_count = 2500;
  const auto rec = synth::drift_recording("d", o).recording;
  const int stride = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(extract_sequence(rec, GazeGlobal{}, 100, stride));
}
BENCHMARK(BM_ExtractSequence)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_FindSimilarSpans(benchmark::State& state) {
  synth::SceneOptions o;
  const auto syn = synth::event_recording("e", o, 3, static_cast<int>(state.range(0)));
  const auto fx = detect_fixations(syn.recording);
  const FeatureSequence seq = feature_sequence("e", fx);
  const QuerySpan q{"e", 0, 2};
  for (auto _ : state)
    benchmark::DoNotOptimize(find_similar_spans(q, std::span<const FeatureSequence>(&seq, 1), QueryOptions{0.5, 10}));
}
BENCHMARK(BM_FindSimilarSpans)->Arg(16)->Arg(200);

}  // namespace
