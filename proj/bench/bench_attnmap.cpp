#include <benchmark/benchmark.h>

#include <random>

#include "posbias/attnmap.hpp"

using namespace posbias::attn;

namespace {

AttentionDump make_dump(int layers, int heads, std::size_t tokens, int n_spans) {
  AttentionDump d;
  d.instance_id = "bench";
  d.layers = layers;
  d.heads = heads;
  d.tokens = tokens;
  d.weights.resize(static_cast<std::size_t>(layers) * heads * tokens);
  std::mt19937 gen(7);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (int l = 0; l < layers; ++l) {
    for (int h = 0; h < heads; ++h) {
      float* row = d.weights.data() + d.offset(l, h);
      double sum = 0.0;
      for (std::size_t i = 0; i < tokens; ++i) sum += row[i] = u(gen);
      for (std::size_t i = 0; i < tokens; ++i) row[i] = static_cast<float>(row[i] / (sum * 1.001));
    }
  }
  const std::size_t width = tokens / static_cast<std::size_t>(n_spans);
  for (int s = 0; s < n_spans; ++s) {
    d.spans.push_back({"doc_" + std::to_string(s + 1), posbias::SpanKind::Document, s * width, (s + 1) * width});
  }
  return d;
}

const AttentionDump& dump() {
  static const AttentionDump d = make_dump(32, 32, 4096, 21);
  return d;
}

void BM_layer_matrix_reference(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(reference::layer_matrix(dump()));
}
void BM_layer_matrix_parallel(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(layer_matrix(dump()));
}
void BM_head_matrix_reference(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(reference::head_matrix(dump(), default_valid_layers(32)));
}
void BM_head_matrix_parallel(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(head_matrix(dump(), default_valid_layers(32)));
}
void BM_average_reference(benchmark::State& state) {
  std::vector<SpanMatrix> ms(64, layer_matrix(dump()));
  for (auto _ : state) benchmark::DoNotOptimize(reference::average(ms));
}
void BM_average_parallel(benchmark::State& state) {
  std::vector<SpanMatrix> ms(64, layer_matrix(dump()));
  for (auto _ : state) benchmark::DoNotOptimize(average(ms));
}

}  // namespace

BENCHMARK(BM_layer_matrix_reference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_layer_matrix_parallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_head_matrix_reference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_head_matrix_parallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_average_reference)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_average_parallel)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
