#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>

#include <nlohmann/json.hpp>

#include "posbias/error.hpp"
#include "posbias/report.hpp"
#include "support.hpp"

using namespace posbias;
using posbias::testing::TempDir;

namespace {

// Fills every default-grid cell with f(cell).
template <class F>
CellTable full_table(F f) {
  RunConfig c;
  CellTable t;
  for (const auto& cell : enumerate_cells(c)) t[cell] = f(cell);
  return t;
}

CellValue acc(double a, double len = 10.0) { return {a, 100, len, 0.0, 0.0}; }

}  // namespace

TEST(BucketTable, Uniform) {
  const auto t = full_table([](const Cell&) { return acc(0.5); });
  const auto rows = bucket_table(t, {});
  ASSERT_EQ(rows.size(), 6u);
  for (const auto& r : rows) {
    EXPECT_DOUBLE_EQ(*r.na, 0.5);
    EXPECT_DOUBLE_EQ(*r.matched, 0.5);
    EXPECT_DOUBLE_EQ(*r.unmatched, 0.5);
    EXPECT_FALSE(r.partial);
  }
  EXPECT_EQ(rows[1].group.label(), "Middle");
  EXPECT_EQ(rows[4].group.label(), "Beginning+Tail");
}

TEST(BucketTable, DistanceMeanAndVariantMean) {
  const auto t = full_table([](const Cell& c) {
    if (c.condition.kind == ConditionKind::Unmatched) {
      return acc(c.condition.variant->kind == VariantKind::PartialGold1 ? 0.2 : 0.4);
    }
    if (const auto* s = std::get_if<SpreadPlacement>(&c.placement)) return acc(0.1 * s->distance);
    return acc(0.0);
  });
  const auto rows = bucket_table(t, {});
  EXPECT_NEAR(*rows[0].na, 0.3, 1e-15);  // {.1,.2,.3,.4,.5}
  const auto cross = rows[3];            // partial-gold1 .2, partial-gold2 .4, random-pair .4
  EXPECT_NEAR(*cross.unmatched, (0.2 + 0.4 + 0.4) / 3.0, 1e-15);
}

TEST(BucketTable, EqualsMeanOfCurvePoints) {
  const auto t = full_table([](const Cell& c) {
    const auto h = std::hash<std::string>{}(c.key());
    return acc(static_cast<double>(h % 1000) / 997.0);
  });
  const auto rows = bucket_table(t, {});
  std::vector<Curve> curves = distance_curves(t);
  const auto li = local_idx_curves(t);
  curves.insert(curves.end(), li.begin(), li.end());
  for (const auto& c : curves) {
    double sum = 0.0;
    for (double y : c.y) sum += y;
    const double m = sum / static_cast<double>(c.y.size());
    const auto& row = *std::find_if(rows.begin(), rows.end(), [&](const BucketRow& r) { return r.group == c.group; });
    const double v = c.column == Column::NA ? *row.na : c.column == Column::Matched ? *row.matched : *row.unmatched;
    EXPECT_EQ(v, m);
  }
}

TEST(BucketTable, MissingCellsFlagPartial) {
  auto t = full_table([](const Cell&) { return acc(0.5); });
  t.erase({SpreadPlacement{kTail, 4}, Condition::na()});
  t.erase({CrossPlacement{kBeginning, kMiddle, 0}, Condition::unmatched({VariantKind::RandomPair})});
  const auto rows = bucket_table(t, {});
  EXPECT_FALSE(rows[0].partial);
  EXPECT_TRUE(rows[2].partial);
  EXPECT_TRUE(rows[3].partial);
}

TEST(Curves, Shapes) {
  const auto t = full_table([](const Cell&) { return acc(0.7); });
  const auto d = distance_curves(t);
  ASSERT_EQ(d.size(), 9u);  // 3 buckets × 3 columns
  for (const auto& c : d) {
    EXPECT_EQ(c.x, (std::vector<int>{1, 2, 3, 4, 5}));
    for (double y : c.y) EXPECT_DOUBLE_EQ(y, 0.7);
  }
  const auto l = local_idx_curves(t);
  ASSERT_EQ(l.size(), 9u);
  for (const auto& c : l) EXPECT_EQ(c.x.size(), 6u);
}

TEST(WeakestLink, SyntheticExample) {
  const std::map<BucketId, double> spread{{kBeginning, 0.8}, {kMiddle, 0.4}, {kTail, 0.6}};
  const auto t = full_table([&](const Cell& c) {
    if (const auto* s = std::get_if<SpreadPlacement>(&c.placement)) return acc(spread.at(s->bucket));
    return acc(0.38);
  });
  const auto w = weakest_link(t, 0.05);
  ASSERT_EQ(w.rows.size(), 3u);
  const auto& bm = w.rows[0];
  EXPECT_EQ(bm.first, kBeginning);
  EXPECT_EQ(bm.second, kMiddle);
  EXPECT_EQ(bm.binding, kMiddle);
  EXPECT_NEAR(bm.deviation, -0.02, 1e-12);
  EXPECT_FALSE(bm.violation);
  EXPECT_NEAR(bm.recognition_bound, std::sqrt(0.4), 1e-15);
}

TEST(WeakestLink, EqualBucketsSymmetric) {
  const auto t = full_table([](const Cell& c) {
    return acc(std::holds_alternative<SpreadPlacement>(c.placement) ? 0.5 : 0.6);
  });
  const auto w = weakest_link(t, 0.05);
  for (const auto& r : w.rows) {
    EXPECT_EQ(r.spread_first, r.spread_second);
    EXPECT_NEAR(r.deviation, 0.1, 1e-12);
    EXPECT_TRUE(r.violation);
  }
}

TEST(WeakestLink, MissingSliceIsNoticed) {
  auto t = full_table([](const Cell&) { return acc(0.5); });
  std::erase_if(t, [](const auto& kv) { return std::holds_alternative<CrossPlacement>(kv.first.placement); });
  const auto w = weakest_link(t);
  EXPECT_TRUE(w.rows.empty());
  EXPECT_EQ(w.notices.size(), 1u);
}

TEST(Variance, RangeAndStddev) {
  const std::vector<double> ys{0.30, 0.31, 0.29, 0.30, 0.30};
  const auto t = full_table([&](const Cell& c) {
    if (const auto* s = std::get_if<SpreadPlacement>(&c.placement)) return acc(ys[static_cast<std::size_t>(s->distance - 1)]);
    return acc(0.0);
  });
  const auto v = variance_check(t);
  ASSERT_EQ(v.size(), 9u);
  for (const auto& r : v) {
    EXPECT_EQ(r.cells, 5u);
    EXPECT_NEAR(r.range, 0.02, 1e-12);
    EXPECT_NEAR(r.stddev, std::sqrt(0.0002 / 5.0), 1e-12);
  }
  const auto flat = variance_check(full_table([](const Cell&) { return acc(0.4); }));
  for (const auto& r : flat) EXPECT_EQ(r.range, 0.0);
}

TEST(LengthSignal, Ratios) {
  const auto t = full_table([](const Cell& c) {
    switch (c.condition.kind) {
      case ConditionKind::NA:
        return acc(0.5, 100.0);
      case ConditionKind::Matched:
        return acc(0.5, 100.0);
      default:
        return acc(0.5, 200.0);
    }
  });
  for (const auto& r : length_signal(t)) {
    EXPECT_DOUBLE_EQ(*r.unmatched_ratio, 2.0);
    EXPECT_DOUBLE_EQ(*r.matched_ratio, 1.0);
    EXPECT_FALSE(r.degenerate);
  }
  const auto z = length_signal(full_table([](const Cell& c) {
    return acc(0.5, c.condition.kind == ConditionKind::NA ? 0.0 : 50.0);
  }));
  for (const auto& r : z) {
    EXPECT_TRUE(r.degenerate);
    EXPECT_FALSE(r.unmatched_ratio.has_value());
    EXPECT_FALSE(r.matched_ratio.has_value());
  }
}

TEST(Emit, WritesViews) {
  TempDir dir;
  const auto rep = build_report(full_table([](const Cell&) { return acc(0.5); }), {});
  const auto files = emit(rep, dir / "out");
  EXPECT_GE(files.size(), 10u);
  for (const auto& f : files) EXPECT_TRUE(std::filesystem::exists(f)) << f;
  const std::string csv = posbias::testing::read_text(dir / "out" / "bucket_table.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "protocol,group,na,matched,unmatched,partial");
  const auto curves = emit(rep, dir / "c", {"curves"});
  for (const auto& f : curves) EXPECT_NE(f.filename().string().find("curves"), std::string::npos);
  const std::string dc = posbias::testing::read_text(dir / "c" / "distance_curves.csv");
  EXPECT_EQ(std::count(dc.begin(), dc.end(), '\n'), 1 + 9 * 5);  // header + one line per point
}

TEST(Emit, EmptyReportWritesNothing) {
  TempDir dir;
  const auto rep = build_report({}, {});
  EXPECT_THROW(emit(rep, dir / "out"), ReportError);
  EXPECT_FALSE(std::filesystem::exists(dir / "out"));
}

TEST(Emit, UnknownView) {
  TempDir dir;
  const auto rep = build_report(full_table([](const Cell&) { return acc(0.5); }), {});
  EXPECT_THROW(emit(rep, dir / "out", {"pie"}), ReportError);
}

TEST(Aggregation, PermutationInvariant) {
  // CellTable is keyed, so insertion order cannot matter; check JSON equality anyway.
  const auto a = full_table([](const Cell& c) { return acc(static_cast<double>(c.key().size() % 7) / 7.0); });
  CellTable b;
  for (auto it = a.rbegin(); it != a.rend(); ++it) b.insert(*it);
  EXPECT_EQ(report_to_json(build_report(a, {})).dump(), report_to_json(build_report(b, {})).dump());
}
