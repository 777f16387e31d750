#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "posbias/layout.hpp"

namespace posbias {

// Two instructed documents, global 0-based indices, always stored ascending.
struct InstructionTarget {
  int x = 0;
  int y = 0;

  static InstructionTarget of(int a, int b);  // sorts; throws MirrorError if a == b
  bool contains(int i) const { return i == x || i == y; }
  friend auto operator<=>(const InstructionTarget&, const InstructionTarget&) = default;
};

enum class ConditionKind { NA, Matched, Unmatched };

// Mirror: both instructed docs relocated into `bucket` (Spread).
// PartialGold1 / PartialGold2: one gold kept, the other mirrored into the
// bucket holding no gold (Cross). RandomPair: two seeded docs in that bucket.
enum class VariantKind { Mirror, PartialGold1, PartialGold2, RandomPair };

struct UnmatchedVariant {
  VariantKind kind = VariantKind::Mirror;
  BucketId bucket = -1;  // Mirror only: bucket receiving the mirrored indices

  std::string id() const;  // e.g. "mirror-tail", "partial-gold1"
  static UnmatchedVariant parse(std::string_view id);
  friend auto operator<=>(const UnmatchedVariant&, const UnmatchedVariant&) = default;
};

struct Condition {
  ConditionKind kind = ConditionKind::NA;
  std::optional<UnmatchedVariant> variant;  // set iff kind == Unmatched

  static Condition na() { return {}; }
  static Condition matched() { return {ConditionKind::Matched, std::nullopt}; }
  static Condition unmatched(UnmatchedVariant v) { return {ConditionKind::Unmatched, v}; }

  std::string key() const;  // "na", "matched", "unmatched:mirror-tail"
  static Condition parse(std::string_view key);
  friend auto operator<=>(const Condition&, const Condition&) = default;
};

std::string to_string(ConditionKind k);

// Relocates each gold into target_bucket at the same local index. Returns the
// distinct results ascending (one index when both golds share a local index).
std::vector<int> mirror(GoldPair golds, BucketId target_bucket, const BucketSpec& spec);

struct VariantTarget {
  UnmatchedVariant variant;
  InstructionTarget target;
};

// Spread: one full mirror per non-gold bucket. Cross: the two partial mirrors
// and a seeded random pair, all landing in the lowest non-gold bucket.
std::vector<VariantTarget> unmatched_variants(const Placement& placement, GoldPair golds,
                                              const BucketSpec& spec, std::uint64_t rng_seed);

// Per-trial seed for the random-pair variant.
std::uint64_t random_pair_seed(std::uint64_t global_seed, std::string_view example_id,
                               const Placement& placement);

std::string render_mfai(const InstructionTarget& target);

void to_json(nlohmann::json& j, const InstructionTarget& t);
nlohmann::json condition_to_json(const Condition& c, const std::optional<InstructionTarget>& t);

}  // namespace posbias
