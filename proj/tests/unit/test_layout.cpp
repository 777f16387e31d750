#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include <nlohmann/json.hpp>

#include "posbias/error.hpp"
#include "posbias/layout.hpp"
#include "posbias/rng.hpp"

using namespace posbias;

namespace {

std::vector<std::string> ids(const std::string& prefix, int n) {
  std::vector<std::string> out;
  for (int i = 1; i <= n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

}  // namespace

TEST(Partition, DefaultGeometry) {
  const auto r = partition({18, 3});
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r[0], (IndexRange{0, 6}));
  EXPECT_EQ(r[1], (IndexRange{6, 12}));
  EXPECT_EQ(r[2], (IndexRange{12, 18}));
}

TEST(Partition, ScaledAndAlternate) {
  EXPECT_EQ(partition({6, 3}), (std::vector<IndexRange>{{0, 2}, {2, 4}, {4, 6}}));
  EXPECT_EQ(partition({18, 2}), (std::vector<IndexRange>{{0, 9}, {9, 18}}));
}

TEST(Partition, RejectsUnevenGeometry) {
  EXPECT_THROW(partition({17, 3}), ConfigError);
  EXPECT_THROW(partition({18, 0}), ConfigError);
}

TEST(BucketSpec, BucketAndLocalOf) {
  const BucketSpec s;
  EXPECT_EQ(s.bucket_of(0), kBeginning);
  EXPECT_EQ(s.bucket_of(11), kMiddle);
  EXPECT_EQ(s.bucket_of(12), kTail);
  EXPECT_EQ(s.local_of(14), 2);
  EXPECT_EQ(bucket_name(kMiddle), "Middle");
}

TEST(PlaceSpread, Examples) {
  const BucketSpec s;
  EXPECT_EQ(place_spread(s, kMiddle, 5), (GoldPair{6, 11}));
  EXPECT_EQ(place_spread(s, kBeginning, 1), (GoldPair{0, 1}));
  EXPECT_EQ(place_spread(s, kTail, 3), (GoldPair{12, 15}));
}

TEST(PlaceSpread, DistanceOutOfRange) {
  EXPECT_THROW(place_spread({}, kMiddle, 0), PlacementError);
  EXPECT_THROW(place_spread({}, kMiddle, 6), PlacementError);
  EXPECT_THROW(place_spread({}, 3, 1), PlacementError);
}

TEST(PlaceCross, Examples) {
  const BucketSpec s;
  EXPECT_EQ(place_cross(s, {kBeginning, kTail}, 2), (GoldPair{2, 14}));
  EXPECT_EQ(place_cross(s, {kBeginning, kMiddle}, 0), (GoldPair{0, 6}));
  EXPECT_EQ(place_cross(s, {kMiddle, kTail}, 5), (GoldPair{11, 17}));
}

TEST(PlaceCross, Errors) {
  EXPECT_THROW(place_cross({}, {kMiddle, kMiddle}, 1), PlacementError);
  EXPECT_THROW(place_cross({}, {kBeginning, kTail}, 6), PlacementError);
  EXPECT_THROW(place_cross({}, {kBeginning, kTail}, -1), PlacementError);
}

TEST(Enumerate, Counts) {
  EXPECT_EQ(enumerate_placements({18, 3}, Protocol::Spread).size(), 15u);
  EXPECT_EQ(enumerate_placements({18, 3}, Protocol::Cross).size(), 18u);
  EXPECT_EQ(enumerate_placements({6, 3}, Protocol::Spread).size(), 3u);
}

TEST(Enumerate, OrderIsBucketMajor) {
  const auto s = enumerate_placements({}, Protocol::Spread);
  EXPECT_EQ(placement_key(s.front()), "spread:b0:d1");
  EXPECT_EQ(placement_key(s[5]), "spread:b1:d1");
  EXPECT_EQ(placement_key(s.back()), "spread:b2:d5");
  const auto c = enumerate_placements({}, Protocol::Cross);
  EXPECT_EQ(placement_key(c.front()), "cross:b0-b1:k0");
  EXPECT_EQ(placement_key(c[6]), "cross:b0-b2:k0");
  EXPECT_EQ(placement_key(c.back()), "cross:b1-b2:k5");
}

TEST(Assemble, PrefixPlacement) {
  const auto d = ids("x", 16);
  const auto l = assemble({"A", "B"}, d, {0, 1}, {});
  std::vector<std::string> expected{"A", "B"};
  expected.insert(expected.end(), d.begin(), d.end());
  EXPECT_EQ(l.doc_order, expected);
}

TEST(Assemble, CrossSlots) {
  const auto d = ids("x", 16);
  const auto l = assemble({"A", "B"}, d, {2, 14}, {});
  std::vector<std::string> expected{"x1", "x2", "A"};
  for (int i = 3; i <= 13; ++i) expected.push_back("x" + std::to_string(i));
  expected.push_back("B");
  for (int i = 14; i <= 16; ++i) expected.push_back("x" + std::to_string(i));
  EXPECT_EQ(l.doc_order, expected);
  EXPECT_EQ(l.bucket_of[14], kTail);
}

TEST(Assemble, CountMismatch) {
  EXPECT_THROW(assemble({"A", "B"}, ids("x", 15), {0, 1}, {}), AssemblyError);
  EXPECT_THROW(assemble({"A", "B"}, ids("x", 17), {0, 1}, {}), AssemblyError);
  EXPECT_THROW(assemble({"A", "B"}, ids("x", 16), {3, 3}, {}), AssemblyError);
}

TEST(PlacementJson, RoundTrip) {
  for (auto proto : {Protocol::Spread, Protocol::Cross}) {
    for (const auto& p : enumerate_placements({}, proto)) {
      const auto j = placement_to_json(p, {});
      EXPECT_EQ(placement_from_json(j), p);
      const auto g = gold_globals({}, p);
      EXPECT_EQ(j.at("gold_globals"), (nlohmann::json::array({g.first, g.second})));
    }
  }
}

// Random geometries and placements; checks the protocol invariants and that
// assemble is a bijection on slots.
TEST(PlacementProperty, RandomCases) {
  SeededRng rng(20260101);
  int cases = 0;
  while (cases < 10000) {
    const int n_buckets = 2 + static_cast<int>(rng.below(4));
    const int size = 2 + static_cast<int>(rng.below(6));
    const BucketSpec spec{n_buckets * size, n_buckets};
    const bool spread = rng.below(2) == 0;
    GoldPair g;
    if (spread) {
      const int b = static_cast<int>(rng.below(static_cast<std::size_t>(n_buckets)));
      const int dist = 1 + static_cast<int>(rng.below(static_cast<std::size_t>(size - 1)));
      g = place_spread(spec, b, dist);
      ASSERT_EQ(spec.bucket_of(g.first), b);
      ASSERT_EQ(spec.bucket_of(g.second), b);
      ASSERT_EQ(spec.local_of(g.first), 0);
      ASSERT_EQ(g.second - g.first, dist);
    } else {
      int b1 = static_cast<int>(rng.below(static_cast<std::size_t>(n_buckets)));
      int b2 = static_cast<int>(rng.below(static_cast<std::size_t>(n_buckets - 1)));
      if (b2 >= b1) ++b2;
      if (b1 > b2) std::swap(b1, b2);
      const int k = static_cast<int>(rng.below(static_cast<std::size_t>(size)));
      g = place_cross(spec, {b1, b2}, k);
      ASSERT_NE(spec.bucket_of(g.first), spec.bucket_of(g.second));
      ASSERT_EQ(spec.local_of(g.first), spec.local_of(g.second));
      ASSERT_EQ(spec.local_of(g.first), k);
    }
    const auto d = ids("x", spec.n_docs - 2);
    const auto l = assemble({"A", "B"}, d, g, spec);
    ASSERT_EQ(l.doc_order[static_cast<std::size_t>(g.first)], "A");
    ASSERT_EQ(l.doc_order[static_cast<std::size_t>(g.second)], "B");
    auto sorted = l.doc_order;
    std::sort(sorted.begin(), sorted.end());
    auto expected = d;
    expected.push_back("A");
    expected.push_back("B");
    std::sort(expected.begin(), expected.end());
    ASSERT_EQ(sorted, expected);
    // Distractors keep their relative order.
    std::vector<std::string> rest;
    for (const auto& id : l.doc_order) {
      if (id != "A" && id != "B") rest.push_back(id);
    }
    ASSERT_EQ(rest, d);
    ++cases;
  }
}
