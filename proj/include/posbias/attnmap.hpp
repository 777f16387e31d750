#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "posbias/layout.hpp"
#include "posbias/prompt.hpp"

namespace posbias::attn {

// Token span [begin, end) of the prompt. gold/instructed are display metadata.
struct TokenSpan {
  std::string name;
  SpanKind kind = SpanKind::Other;
  std::size_t begin = 0;
  std::size_t end = 0;
  bool gold = false;
  bool instructed = false;

  std::size_t size() const { return end - begin; }
};

// Attention of the first generated token over the prompt, [layer][head][token].
struct AttentionDump {
  std::string model_id;
  std::string instance_id;
  std::string condition;
  int layers = 0;
  int heads = 0;
  std::size_t tokens = 0;
  std::vector<float> weights;
  std::vector<TokenSpan> spans;

  std::size_t offset(int layer, int head) const {
    return (static_cast<std::size_t>(layer) * static_cast<std::size_t>(heads) +
            static_cast<std::size_t>(head)) *
           tokens;
  }
  float at(int layer, int head, std::size_t token) const { return weights[offset(layer, head) + token]; }
  std::span<const float> row(int layer, int head) const {
    return {weights.data() + offset(layer, head), tokens};
  }

  // Throws DumpError: shape, negative weights, row mass above 1 + 1e-4,
  // spans empty/overlapping/out of range.
  void validate() const;
};

inline constexpr double kRowMassTolerance = 1e-4;

// Directory layout: manifest.json + attn.f32 (little-endian float32, row-major).
AttentionDump load_dump(const std::filesystem::path& dir);
void save_dump(const std::filesystem::path& dir, const AttentionDump& dump);

enum class Axis { Layer, Head };

struct SpanLabel {
  std::string name;
  SpanKind kind = SpanKind::Other;
  bool gold = false;
  bool instructed = false;
};

// Rows are layers (layer matrix) or heads (head matrix); columns are spans.
struct SpanMatrix {
  Axis axis = Axis::Layer;
  std::vector<std::string> units;
  std::vector<SpanLabel> spans;
  std::vector<double> values;     // units × spans, row-major
  std::vector<double> std_error;  // same shape; zero for single instances
  std::size_t samples = 1;
  bool low_sample = false;            // samples below the requested minimum
  std::vector<bool> unnormalized;     // per unit, set by doc_normalize on zero mass

  std::size_t rows() const { return units.size(); }
  std::size_t cols() const { return spans.size(); }
  double& at(std::size_t unit, std::size_t span) { return values[unit * cols() + span]; }
  double at(std::size_t unit, std::size_t span) const { return values[unit * cols() + span]; }
};

inline constexpr std::size_t kMinSamples = 20;

// Mean attention per token over the span. Throws ShapeError on an empty span.
double density(const AttentionDump& dump, int layer, int head, const TokenSpan& span);

// M[l][s] = (1 / (H·|s|)) Σ_h Σ_{i∈s} a[l][h][i]. OpenMP over layers × spans.
SpanMatrix layer_matrix(const AttentionDump& dump);

// H[h][s] = (1 / (|valid|·|s|)) Σ_{l∈valid} Σ_{i∈s} a[l][h][i].
SpanMatrix head_matrix(const AttentionDump& dump, IndexRange valid_layers);

// All layers except the first two and last two (all layers when L <= 4).
IndexRange default_valid_layers(int layers);

// Per-dump matrices, computed in parallel over dumps.
std::vector<SpanMatrix> layer_matrices(std::span<const AttentionDump> dumps);
std::vector<SpanMatrix> head_matrices(std::span<const AttentionDump> dumps, IndexRange valid_layers);

// Element-wise mean and standard error across instances; columns are aligned
// by span name. Throws ShapeError on mismatched units or span sets.
SpanMatrix average(std::span<const SpanMatrix> matrices, std::size_t min_samples = kMinSamples);

// a − b element-wise. Throws ShapeError unless labels match.
SpanMatrix diff(const SpanMatrix& a, const SpanMatrix& b);

// Keeps document spans only and rescales each row to sum to 1. Rows with no
// document mass are left as-is and flagged.
SpanMatrix doc_normalize(const SpanMatrix& m);

// Serial implementations in the textbook summation order (heads, then tokens).
// Kept for cross-checking the parallel kernels and for the benchmark.
namespace reference {
double density(const AttentionDump& dump, int layer, int head, const TokenSpan& span);
SpanMatrix layer_matrix(const AttentionDump& dump);
SpanMatrix head_matrix(const AttentionDump& dump, IndexRange valid_layers);
SpanMatrix average(std::span<const SpanMatrix> matrices, std::size_t min_samples = kMinSamples);
}  // namespace reference

// --- emission ----------------------------------------------------------------

inline constexpr double kLogFloor = 1e-8;

std::string matrix_csv(const SpanMatrix& m, bool spans_as_rows = false);
// log10 colouring for attention mass, diverging colouring for difference maps.
std::string matrix_svg(const SpanMatrix& m, const std::string& title, bool log_scale, bool diverging);

}  // namespace posbias::attn
