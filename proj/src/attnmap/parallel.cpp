#include <cmath>
#include <cstdint>

#include "common.hpp"

namespace posbias::attn {

double density(const AttentionDump& dump, int layer, int head, const TokenSpan& span) {
  if (span.size() == 0) throw ShapeError("density over empty span " + span.name);
  if (span.end > dump.tokens) throw ShapeError("span " + span.name + " exceeds the prompt");
  const auto row = dump.row(layer, head);
  double sum = 0.0;
#pragma omp simd reduction(+ : sum)
  for (std::size_t i = span.begin; i < span.end; ++i) sum += row[i];
  return sum / static_cast<double>(span.size());
}

// Tokens outer, heads inner: the reverse of the reference order, which the
// tests use to check summation-order independence.
SpanMatrix layer_matrix(const AttentionDump& dump) {
  SpanMatrix m = detail::empty_matrix(dump, Axis::Layer);
  const auto n_layers = static_cast<std::int64_t>(dump.layers);
  const auto n_spans = static_cast<std::int64_t>(dump.spans.size());
#pragma omp parallel for collapse(2) schedule(static)
  for (std::int64_t l = 0; l < n_layers; ++l) {
    for (std::int64_t s = 0; s < n_spans; ++s) {
      const TokenSpan& span = dump.spans[static_cast<std::size_t>(s)];
      double sum = 0.0;
      for (std::size_t i = span.begin; i < span.end; ++i) {
        for (int h = 0; h < dump.heads; ++h) sum += dump.at(static_cast<int>(l), h, i);
      }
      m.at(static_cast<std::size_t>(l), static_cast<std::size_t>(s)) =
          sum / (static_cast<double>(dump.heads) * static_cast<double>(span.size()));
    }
  }
  return m;
}

SpanMatrix head_matrix(const AttentionDump& dump, IndexRange valid_layers) {
  detail::check_valid_layers(dump, valid_layers);
  SpanMatrix m = detail::empty_matrix(dump, Axis::Head);
  const auto n_heads = static_cast<std::int64_t>(dump.heads);
  const auto n_spans = static_cast<std::int64_t>(dump.spans.size());
#pragma omp parallel for collapse(2) schedule(static)
  for (std::int64_t h = 0; h < n_heads; ++h) {
    for (std::int64_t s = 0; s < n_spans; ++s) {
      const TokenSpan& span = dump.spans[static_cast<std::size_t>(s)];
      double sum = 0.0;
      for (int l = valid_layers.begin; l < valid_layers.end; ++l) {
        const auto row = dump.row(l, static_cast<int>(h));
        for (std::size_t i = span.begin; i < span.end; ++i) sum += row[i];
      }
      m.at(static_cast<std::size_t>(h), static_cast<std::size_t>(s)) =
          sum / (static_cast<double>(valid_layers.size()) * static_cast<double>(span.size()));
    }
  }
  return m;
}

IndexRange default_valid_layers(int layers) {
  if (layers <= 4) return {0, layers};
  return {2, layers - 2};
}

std::vector<SpanMatrix> layer_matrices(std::span<const AttentionDump> dumps) {
  std::vector<SpanMatrix> out(dumps.size());
  const auto n = static_cast<std::int64_t>(dumps.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = reference::layer_matrix(dumps[static_cast<std::size_t>(i)]);
  }
  return out;
}

std::vector<SpanMatrix> head_matrices(std::span<const AttentionDump> dumps, IndexRange valid_layers) {
  for (const auto& d : dumps) detail::check_valid_layers(d, valid_layers);
  std::vector<SpanMatrix> out(dumps.size());
  const auto n = static_cast<std::int64_t>(dumps.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = reference::head_matrix(dumps[static_cast<std::size_t>(i)], valid_layers);
  }
  return out;
}

SpanMatrix average(std::span<const SpanMatrix> matrices, std::size_t min_samples) {
  if (matrices.empty()) throw ShapeError("cannot average zero matrices");
  const SpanMatrix& ref = matrices.front();
  std::vector<std::vector<std::size_t>> perms;
  perms.reserve(matrices.size());
  for (const auto& m : matrices) {
    detail::check_units(ref, m);
    perms.push_back(detail::align_columns(ref, m));
  }
  SpanMatrix out = ref;
  const double n = static_cast<double>(matrices.size());
  const auto cells = static_cast<std::int64_t>(ref.values.size());
  const std::size_t cols = ref.cols();
#pragma omp parallel for schedule(static)
  for (std::int64_t c = 0; c < cells; ++c) {
    const std::size_t u = static_cast<std::size_t>(c) / cols;
    const std::size_t s = static_cast<std::size_t>(c) % cols;
    // Welford keeps the variance stable for near-identical inputs.
    double mean = 0.0, m2 = 0.0;
    for (std::size_t k = 0; k < matrices.size(); ++k) {
      const double x = matrices[k].at(u, perms[k][s]);
      const double delta = x - mean;
      mean += delta / static_cast<double>(k + 1);
      m2 += delta * (x - mean);
    }
    out.values[static_cast<std::size_t>(c)] = mean;
    out.std_error[static_cast<std::size_t>(c)] =
        matrices.size() > 1 ? std::sqrt(m2 / (n - 1.0)) / std::sqrt(n) : 0.0;
  }
  out.samples = matrices.size();
  out.low_sample = matrices.size() < min_samples;
  return out;
}

}  // namespace posbias::attn
