#include <cmath>

#include "common.hpp"

namespace posbias::attn::reference {

double density(const AttentionDump& dump, int layer, int head, const TokenSpan& span) {
  if (span.size() == 0) throw ShapeError("density over empty span " + span.name);
  if (span.end > dump.tokens) throw ShapeError("span " + span.name + " exceeds the prompt");
  double sum = 0.0;
  for (std::size_t i = span.begin; i < span.end; ++i) sum += dump.at(layer, head, i);
  return sum / static_cast<double>(span.size());
}

SpanMatrix layer_matrix(const AttentionDump& dump) {
  SpanMatrix m = detail::empty_matrix(dump, Axis::Layer);
  for (int l = 0; l < dump.layers; ++l) {
    for (std::size_t s = 0; s < dump.spans.size(); ++s) {
      const TokenSpan& span = dump.spans[s];
      double sum = 0.0;
      for (int h = 0; h < dump.heads; ++h) {
        for (std::size_t i = span.begin; i < span.end; ++i) sum += dump.at(l, h, i);
      }
      m.at(l, s) = sum / (static_cast<double>(dump.heads) * static_cast<double>(span.size()));
    }
  }
  return m;
}

SpanMatrix head_matrix(const AttentionDump& dump, IndexRange valid_layers) {
  detail::check_valid_layers(dump, valid_layers);
  SpanMatrix m = detail::empty_matrix(dump, Axis::Head);
  for (int h = 0; h < dump.heads; ++h) {
    for (std::size_t s = 0; s < dump.spans.size(); ++s) {
      const TokenSpan& span = dump.spans[s];
      double sum = 0.0;
      for (int l = valid_layers.begin; l < valid_layers.end; ++l) {
        for (std::size_t i = span.begin; i < span.end; ++i) sum += dump.at(l, h, i);
      }
      m.at(h, s) = sum / (static_cast<double>(valid_layers.size()) * static_cast<double>(span.size()));
    }
  }
  return m;
}

SpanMatrix average(std::span<const SpanMatrix> matrices, std::size_t min_samples) {
  if (matrices.empty()) throw ShapeError("cannot average zero matrices");
  const SpanMatrix& ref = matrices.front();
  SpanMatrix out = ref;
  const double n = static_cast<double>(matrices.size());
  std::vector<std::vector<std::size_t>> perms;
  for (const auto& m : matrices) {
    detail::check_units(ref, m);
    perms.push_back(detail::align_columns(ref, m));
  }
  for (std::size_t u = 0; u < ref.rows(); ++u) {
    for (std::size_t s = 0; s < ref.cols(); ++s) {
      double sum = 0.0;
      for (std::size_t k = 0; k < matrices.size(); ++k) sum += matrices[k].at(u, perms[k][s]);
      const double mean = sum / n;
      double ss = 0.0;
      for (std::size_t k = 0; k < matrices.size(); ++k) {
        const double d = matrices[k].at(u, perms[k][s]) - mean;
        ss += d * d;
      }
      out.at(u, s) = mean;
      out.std_error[u * ref.cols() + s] = matrices.size() > 1 ? std::sqrt(ss / (n - 1.0)) / std::sqrt(n) : 0.0;
    }
  }
  out.samples = matrices.size();
  out.low_sample = matrices.size() < min_samples;
  return out;
}

}  // namespace posbias::attn::reference
