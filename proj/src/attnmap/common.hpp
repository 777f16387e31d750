#pragma once

#include <string>

#include "posbias/attnmap.hpp"
#include "posbias/error.hpp"

namespace posbias::attn::detail {

inline SpanMatrix empty_matrix(const AttentionDump& dump, Axis axis) {
  SpanMatrix m;
  m.axis = axis;
  const int n_units = axis == Axis::Layer ? dump.layers : dump.heads;
  for (int u = 0; u < n_units; ++u) m.units.push_back((axis == Axis::Layer ? "L" : "H") + std::to_string(u));
  for (const auto& s : dump.spans) {
    if (s.size() == 0) throw ShapeError("span " + s.name + " is empty");
    m.spans.push_back({s.name, s.kind, s.gold, s.instructed});
  }
  m.values.assign(m.rows() * m.cols(), 0.0);
  m.std_error.assign(m.values.size(), 0.0);
  m.unnormalized.assign(m.rows(), false);
  return m;
}

inline void check_valid_layers(const AttentionDump& dump, IndexRange valid) {
  if (valid.size() <= 0 || valid.begin < 0 || valid.end > dump.layers) {
    throw ShapeError("valid layer range [" + std::to_string(valid.begin) + ", " + std::to_string(valid.end) +
                     ") is empty or outside [0, " + std::to_string(dump.layers) + ")");
  }
}

// Column permutation mapping `m`'s spans onto `ref`'s span order.
std::vector<std::size_t> align_columns(const SpanMatrix& ref, const SpanMatrix& m);
void check_units(const SpanMatrix& ref, const SpanMatrix& m);

}  // namespace posbias::attn::detail
