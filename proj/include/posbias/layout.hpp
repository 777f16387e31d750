#pragma once

#include <array>
#include <compare>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace posbias {

// Bucket ids are 0-based; with the default three-bucket geometry they read as
// Beginning (0), Middle (1) and Tail (2).
using BucketId = int;
inline constexpr BucketId kBeginning = 0;
inline constexpr BucketId kMiddle = 1;
inline constexpr BucketId kTail = 2;

std::string bucket_name(BucketId b);

struct IndexRange {
  int begin = 0;
  int end = 0;  // exclusive
  int size() const { return end - begin; }
  bool contains(int i) const { return i >= begin && i < end; }
  friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

struct BucketSpec {
  int n_docs = 18;
  int n_buckets = 3;

  // Throws ConfigError unless n_docs splits evenly into n_buckets.
  void validate() const;
  int bucket_size() const;
  int start(BucketId b) const;
  BucketId bucket_of(int global) const;
  int local_of(int global) const;

  friend bool operator==(const BucketSpec&, const BucketSpec&) = default;
};

std::vector<IndexRange> partition(const BucketSpec& spec);

enum class Protocol { Spread, Cross };
std::string to_string(Protocol p);
Protocol protocol_from_string(const std::string& s);

struct SpreadPlacement {
  BucketId bucket = 0;
  int distance = 1;
  friend auto operator<=>(const SpreadPlacement&, const SpreadPlacement&) = default;
};

struct CrossPlacement {
  BucketId first = 0;
  BucketId second = 1;
  int local_idx = 0;
  friend auto operator<=>(const CrossPlacement&, const CrossPlacement&) = default;
};

using Placement = std::variant<SpreadPlacement, CrossPlacement>;

Protocol protocol_of(const Placement& p);

// Global indices of the two gold documents, hop order: first is the earlier slot.
struct GoldPair {
  int first = 0;
  int second = 0;
  bool contains(int i) const { return i == first || i == second; }
  friend auto operator<=>(const GoldPair&, const GoldPair&) = default;
};

GoldPair place_spread(const BucketSpec& spec, BucketId bucket, int distance);
GoldPair place_cross(const BucketSpec& spec, std::array<BucketId, 2> pair, int local_idx);
GoldPair gold_globals(const BucketSpec& spec, const Placement& placement);

// Spread: bucket-major, distance ascending. Cross: bucket pairs in lexicographic
// order, local index ascending.
std::vector<Placement> enumerate_placements(const BucketSpec& spec, Protocol protocol);

// Short stable token, e.g. "spread:b1:d5" or "cross:b0-b2:k3".
std::string placement_key(const Placement& p);

struct ContextLayout {
  std::vector<std::string> doc_order;
  GoldPair gold_globals;
  std::vector<BucketId> bucket_of;

  int n_docs() const { return static_cast<int>(doc_order.size()); }
};

// Gold documents go to gold_globals in hop order; distractors fill the other
// slots keeping their given order.
ContextLayout assemble(const std::array<std::string, 2>& gold_ids,
                       std::span<const std::string> distractor_ids, GoldPair gold_globals,
                       const BucketSpec& spec);

void to_json(nlohmann::json& j, const BucketSpec& s);
void from_json(const nlohmann::json& j, BucketSpec& s);
nlohmann::json placement_to_json(const Placement& p, const BucketSpec& spec);
Placement placement_from_json(const nlohmann::json& j);

}  // namespace posbias
