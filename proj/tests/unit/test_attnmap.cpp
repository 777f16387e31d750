#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "posbias/attnmap.hpp"
#include "posbias/error.hpp"
#include "support.hpp"

using namespace posbias;
using namespace posbias::attn;
using posbias::testing::TempDir;

namespace {

// Spans tile [0, tokens) exactly: a header, `docs` documents of varying
// length, and a question tail. Each row sums to `mass`.
AttentionDump random_dump(int layers, int heads, int docs, std::uint32_t seed, double mass = 0.9) {
  std::mt19937 rng(seed);
  std::uniform_int_distribution<int> len(1, 9);
  AttentionDump d;
  d.model_id = "toy";
  d.instance_id = "i" + std::to_string(seed);
  d.condition = "na";
  d.layers = layers;
  d.heads = heads;
  std::size_t pos = 0;
  auto add = [&](std::string name, SpanKind kind, std::size_t n, bool gold = false) {
    d.spans.push_back({std::move(name), kind, pos, pos + n, gold, false});
    pos += n;
  };
  add("task", SpanKind::TaskInstruction, static_cast<std::size_t>(len(rng)));
  for (int i = 0; i < docs; ++i) add("doc" + std::to_string(i), SpanKind::Document, static_cast<std::size_t>(len(rng)), i == 1);
  add("question", SpanKind::Question, static_cast<std::size_t>(len(rng)));
  d.tokens = pos;
  d.weights.resize(static_cast<std::size_t>(layers * heads) * d.tokens);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int l = 0; l < layers; ++l) {
    for (int h = 0; h < heads; ++h) {
      std::vector<double> row(d.tokens);
      double sum = 0.0;
      for (auto& x : row) sum += (x = u(rng));
      for (std::size_t t = 0; t < d.tokens; ++t) d.weights[d.offset(l, h) + t] = static_cast<float>(row[t] / sum * mass);
    }
  }
  return d;
}

void expect_matrices_near(const SpanMatrix& a, const SpanMatrix& b, double tol) {
  ASSERT_EQ(a.units, b.units);
  ASSERT_EQ(a.cols(), b.cols());
  for (std::size_t i = 0; i < a.values.size(); ++i) EXPECT_NEAR(a.values[i], b.values[i], tol) << i;
  for (std::size_t i = 0; i < a.std_error.size(); ++i) EXPECT_NEAR(a.std_error[i], b.std_error[i], tol) << i;
}

}  // namespace

TEST(Density, TilingRecoversRowMass) {
  for (std::uint32_t seed = 1; seed <= 20; ++seed) {
    const auto d = random_dump(3, 4, 8, seed);
    for (int l = 0; l < d.layers; ++l) {
      for (int h = 0; h < d.heads; ++h) {
        double mass = 0.0;
        for (float w : d.row(l, h)) mass += w;
        double tiled = 0.0, tiled_ref = 0.0;
        for (const auto& s : d.spans) {
          tiled += static_cast<double>(s.size()) * density(d, l, h, s);
          tiled_ref += static_cast<double>(s.size()) * reference::density(d, l, h, s);
        }
        EXPECT_NEAR(tiled, mass, 1e-9);
        EXPECT_NEAR(tiled_ref, mass, 1e-9);
      }
    }
  }
}

TEST(Density, EmptySpanThrows) {
  auto d = random_dump(1, 1, 2, 3);
  const TokenSpan empty{"e", SpanKind::Other, 2, 2};
  EXPECT_THROW(density(d, 0, 0, empty), ShapeError);
  EXPECT_THROW(reference::density(d, 0, 0, empty), ShapeError);
}

TEST(LayerMatrix, HandComputed) {
  // 2 layers × 2 heads × 4 tokens; spans A = [0,1), B = [1,4). Dyadic weights keep the sums exact.
  AttentionDump d;
  d.layers = 2;
  d.heads = 2;
  d.tokens = 4;
  d.weights = {0.5f,  0.25f, 0.125f, 0.125f,   // l0 h0
               0.25f, 0.25f, 0.25f,  0.25f,    // l0 h1
               0.0f,  0.5f,  0.25f,  0.25f,    // l1 h0
               0.75f, 0.0f,  0.0f,   0.25f};   // l1 h1
  d.spans = {{"A", SpanKind::Document, 0, 1, true, false}, {"B", SpanKind::Document, 1, 4, false, true}};
  d.validate();
  const auto m = layer_matrix(d);
  ASSERT_EQ(m.rows(), 2u);
  ASSERT_EQ(m.cols(), 2u);
  EXPECT_EQ(m.units, (std::vector<std::string>{"L0", "L1"}));
  EXPECT_EQ(m.at(0, 0), (0.5 + 0.25) / 2.0);
  EXPECT_EQ(m.at(0, 1), (0.5 + 0.75) / 6.0);
  EXPECT_EQ(m.at(1, 0), (0.0 + 0.75) / 2.0);
  EXPECT_EQ(m.at(1, 1), (1.0 + 0.25) / 6.0);
  EXPECT_TRUE(m.spans[0].gold);
  EXPECT_TRUE(m.spans[1].instructed);

  const auto h = head_matrix(d, {0, 2});
  EXPECT_EQ(h.units, (std::vector<std::string>{"H0", "H1"}));
  EXPECT_EQ(h.at(0, 0), (0.5 + 0.0) / 2.0);
  EXPECT_EQ(h.at(0, 1), (0.5 + 1.0) / 6.0);
  EXPECT_EQ(h.at(1, 0), (0.25 + 0.75) / 2.0);
  EXPECT_EQ(h.at(1, 1), (0.75 + 0.25) / 6.0);
  const auto h1 = head_matrix(d, {1, 2});
  EXPECT_EQ(h1.at(1, 0), 0.75);
}

TEST(LayerMatrix, ParallelMatchesReference) {
  for (std::uint32_t seed = 1; seed <= 10; ++seed) {
    const auto d = random_dump(6, 5, 20, seed);
    expect_matrices_near(layer_matrix(d), reference::layer_matrix(d), 1e-12);
    const auto valid = default_valid_layers(d.layers);
    expect_matrices_near(head_matrix(d, valid), reference::head_matrix(d, valid), 1e-12);
  }
}

TEST(LayerMatrix, BatchMatchesSingle) {
  std::vector<AttentionDump> dumps;
  for (std::uint32_t s = 0; s < 6; ++s) dumps.push_back(random_dump(4, 2, 5, 100 + s));
  const auto lm = layer_matrices(dumps);
  const auto hm = head_matrices(dumps, {0, 4});
  for (std::size_t i = 0; i < dumps.size(); ++i) {
    expect_matrices_near(lm[i], reference::layer_matrix(dumps[i]), 0.0);
    expect_matrices_near(hm[i], reference::head_matrix(dumps[i], {0, 4}), 0.0);
  }
}

TEST(HeadMatrix, ValidLayers) {
  EXPECT_EQ(default_valid_layers(32).begin, 2);
  EXPECT_EQ(default_valid_layers(32).end, 30);
  EXPECT_EQ(default_valid_layers(4).begin, 0);
  EXPECT_EQ(default_valid_layers(4).end, 4);
  const auto d = random_dump(4, 2, 3, 9);
  EXPECT_THROW(head_matrix(d, {3, 3}), ShapeError);
  EXPECT_THROW(head_matrix(d, {0, 5}), ShapeError);
  EXPECT_THROW(reference::head_matrix(d, {-1, 2}), ShapeError);
}

TEST(Average, IdenticalInputsHaveZeroError) {
  const auto m = layer_matrix(random_dump(3, 2, 4, 5));
  const std::vector<SpanMatrix> same(7, m);
  for (const auto& avg : {average(same), reference::average(same)}) {
    for (std::size_t i = 0; i < m.values.size(); ++i) {
      EXPECT_NEAR(avg.values[i], m.values[i], 1e-15);
      EXPECT_NEAR(avg.std_error[i], 0.0, 1e-15);
    }
    EXPECT_EQ(avg.samples, 7u);
    EXPECT_TRUE(avg.low_sample);
  }
  EXPECT_FALSE(average(same, 5).low_sample);
}

TEST(Average, MeanAndStandardError) {
  std::vector<SpanMatrix> ms;
  for (std::uint32_t s = 0; s < 25; ++s) {
    auto d = random_dump(2, 2, 3, 7);  // same span lengths
    for (auto& w : d.weights) w *= static_cast<float>(s + 1) / 25.0f;
    ms.push_back(layer_matrix(d));
  }
  const auto avg = average(ms);
  EXPECT_FALSE(avg.low_sample);
  expect_matrices_near(avg, reference::average(ms), 1e-12);
  // Independent two-pass computation for one cell.
  double mean = 0.0;
  for (const auto& m : ms) mean += m.values[1];
  mean /= 25.0;
  double ss = 0.0;
  for (const auto& m : ms) ss += (m.values[1] - mean) * (m.values[1] - mean);
  EXPECT_NEAR(avg.values[1], mean, 1e-12);
  EXPECT_NEAR(avg.std_error[1], std::sqrt(ss / 24.0) / 5.0, 1e-12);
}

TEST(Average, AlignsColumnsByName) {
  const auto a = layer_matrix(random_dump(2, 2, 3, 11));
  SpanMatrix b = a;
  std::reverse(b.spans.begin(), b.spans.end());
  for (std::size_t u = 0; u < b.rows(); ++u) {
    for (std::size_t s = 0; s < b.cols(); ++s) b.at(u, s) = a.at(u, a.cols() - 1 - s);
  }
  const std::vector<SpanMatrix> pair{a, b};
  const auto avg = average(pair);
  for (std::size_t i = 0; i < a.values.size(); ++i) EXPECT_NEAR(avg.values[i], a.values[i], 1e-15);
}

TEST(Average, ShapeErrors) {
  const auto a = layer_matrix(random_dump(2, 2, 3, 11));
  const auto fewer_layers = layer_matrix(random_dump(3, 2, 3, 11));
  const auto fewer_spans = layer_matrix(random_dump(2, 2, 4, 11));
  auto renamed = a;
  renamed.spans[0].name = "other";
  for (const auto& bad : {fewer_layers, fewer_spans, renamed}) {
    const std::vector<SpanMatrix> v{a, bad};
    EXPECT_THROW(average(v), ShapeError);
    EXPECT_THROW(reference::average(v), ShapeError);
    EXPECT_THROW(diff(a, bad), ShapeError);
  }
  EXPECT_THROW(average(std::vector<SpanMatrix>{}), ShapeError);
}

TEST(Diff, SelfIsZero) {
  const auto m = layer_matrix(random_dump(3, 3, 6, 4));
  const auto z = diff(m, m);
  for (double v : z.values) EXPECT_EQ(v, 0.0);
  for (double v : z.std_error) EXPECT_EQ(v, 0.0);
  const auto other = layer_matrix(random_dump(3, 3, 6, 4, 0.5));
  const auto d = diff(m, other);
  for (std::size_t i = 0; i < d.values.size(); ++i) EXPECT_NEAR(d.values[i], m.values[i] - other.values[i], 1e-15);
}

TEST(DocNormalize, RowsSumToOne) {
  for (std::uint32_t seed = 1; seed <= 10; ++seed) {
    const auto m = layer_matrix(random_dump(4, 3, 9, seed));
    const auto n = doc_normalize(m);
    ASSERT_EQ(n.cols(), 9u);
    for (const auto& s : n.spans) EXPECT_EQ(s.kind, SpanKind::Document);
    for (std::size_t u = 0; u < n.rows(); ++u) {
      double sum = 0.0;
      for (std::size_t s = 0; s < n.cols(); ++s) sum += n.at(u, s);
      EXPECT_NEAR(sum, 1.0, 1e-9);
      EXPECT_FALSE(n.unnormalized[u]);
    }
  }
}

TEST(DocNormalize, ZeroMassRowFlagged) {
  auto d = random_dump(2, 1, 3, 2);
  for (const auto& s : d.spans) {
    if (s.kind != SpanKind::Document) continue;
    for (std::size_t t = s.begin; t < s.end; ++t) d.weights[d.offset(1, 0) + t] = 0.0f;
  }
  const auto n = doc_normalize(layer_matrix(d));
  EXPECT_FALSE(n.unnormalized[0]);
  EXPECT_TRUE(n.unnormalized[1]);
  for (std::size_t s = 0; s < n.cols(); ++s) EXPECT_EQ(n.at(1, s), 0.0);

  auto no_docs = layer_matrix(d);
  for (auto& s : no_docs.spans) s.kind = SpanKind::Other;
  EXPECT_THROW(doc_normalize(no_docs), ShapeError);
}

TEST(Dump, RoundTrip) {
  TempDir dir;
  const auto d = random_dump(3, 2, 5, 77);
  save_dump(dir / "d", d);
  EXPECT_TRUE(std::filesystem::exists(dir / "d" / "manifest.json"));
  EXPECT_EQ(std::filesystem::file_size(dir / "d" / "attn.f32"), d.weights.size() * 4);
  const auto back = load_dump(dir / "d");
  EXPECT_EQ(back.model_id, d.model_id);
  EXPECT_EQ(back.instance_id, d.instance_id);
  EXPECT_EQ(back.layers, d.layers);
  EXPECT_EQ(back.heads, d.heads);
  EXPECT_EQ(back.tokens, d.tokens);
  EXPECT_EQ(back.weights, d.weights);
  ASSERT_EQ(back.spans.size(), d.spans.size());
  for (std::size_t i = 0; i < d.spans.size(); ++i) {
    EXPECT_EQ(back.spans[i].name, d.spans[i].name);
    EXPECT_EQ(back.spans[i].kind, d.spans[i].kind);
    EXPECT_EQ(back.spans[i].begin, d.spans[i].begin);
    EXPECT_EQ(back.spans[i].end, d.spans[i].end);
    EXPECT_EQ(back.spans[i].gold, d.spans[i].gold);
  }
}

TEST(Dump, TruncatedPayloadRejected) {
  TempDir dir;
  save_dump(dir / "d", random_dump(2, 2, 3, 1));
  std::filesystem::resize_file(dir / "d" / "attn.f32", 12);
  EXPECT_THROW(load_dump(dir / "d"), DumpError);
  EXPECT_THROW(load_dump(dir / "missing"), DumpError);
}

TEST(Dump, ValidateRejectsBadInput) {
  const auto good = random_dump(2, 2, 3, 1);
  EXPECT_NO_THROW(good.validate());

  auto heavy = good;
  heavy.weights[0] += 0.5f;  // row mass 1.4
  EXPECT_THROW(heavy.validate(), DumpError);

  auto negative = good;
  negative.weights[3] = -0.01f;
  EXPECT_THROW(negative.validate(), DumpError);

  auto overlap = good;
  overlap.spans[1].begin -= 1;
  EXPECT_THROW(overlap.validate(), DumpError);

  auto out_of_range = good;
  out_of_range.spans.back().end = good.tokens + 1;
  EXPECT_THROW(out_of_range.validate(), DumpError);

  auto short_weights = good;
  short_weights.weights.pop_back();
  EXPECT_THROW(short_weights.validate(), DumpError);
}

TEST(Emission, CsvLayouts) {
  const auto m = layer_matrix(random_dump(2, 1, 2, 3));
  const std::string csv = matrix_csv(m);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "layer,task,doc0,doc1,question");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  const std::string t = matrix_csv(m, true);
  EXPECT_EQ(t.substr(0, t.find('\n')), "span,gold,instructed,L0,L1");
  EXPECT_NE(t.find("\ndoc1,1,0,"), std::string::npos);
}

TEST(Emission, SvgMarksGoldAndLowSample) {
  auto m = layer_matrix(random_dump(2, 1, 2, 3));
  m.spans[2].instructed = true;
  m.low_sample = true;
  m.samples = 3;
  const std::string svg = matrix_svg(m, "toy", true, false);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("doc1*"), std::string::npos);
  EXPECT_NE(svg.find("#c62828"), std::string::npos);
  EXPECT_NE(svg.find("low sample"), std::string::npos);
  const std::string div = matrix_svg(diff(m, m), "delta", false, true);
  EXPECT_NE(div.find("delta"), std::string::npos);
}
