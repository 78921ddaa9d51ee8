#include <benchmark/benchmark.h>

#include "gazespiral/spiral.hpp"

using namespace gazespiral;

namespace {

SlitscanSequence striped_sequence(std::size_t n, int height) {
  SlitscanSequence seq;
  seq.height = height;
  seq.scanlines.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& line = seq.scanlines[i];
    line.pixels.resize(static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y)
      line.pixels[static_cast<std::size_t>(y)] =
          Rgb{static_cast<std::uint8_t>(i * 7), static_cast<std::uint8_t>(y * 2), static_cast<std::uint8_t>(i / 50)};
  }
  return seq;
}

void BM_BuildGeometry(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(build_geometry(n, SpiralParams{}));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BuildGeometry)->Arg(1000)->Arg(45000);

void BM_RenderSpiral(benchmark::State& state) {
  const auto seq = striped_sequence(static_cast<std::size_t>(state.range(0)), 100);
  SpiralParams p;
  p.H_px = static_cast<int>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(render_spiral(seq, p));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RenderSpiral)->Args({250, 20})->Args({2500, 8})->Args({45000, 2})->Unit(benchmark::kMillisecond);

void BM_RenderGlyph(benchmark::State& state) {
  const auto seq = striped_sequence(static_cast<std::size_t>(state.range(0)), 100);
  for (auto _ : state) benchmark::DoNotOptimize(render_glyph(seq, SpiralParams{}, 128));
}
BENCHMARK(BM_RenderGlyph)->Arg(250)->Arg(2500)->Unit(benchmark::kMillisecond);

void BM_RenderLinear(benchmark::State& state) {
  const auto seq = striped_sequence(45000, 100);
  for (auto _ : state) benchmark::DoNotOptimize(render_linear(seq, 4000));
}
BENCHMARK(BM_RenderLinear)->Unit(benchmark::kMillisecond);

}  // namespace
