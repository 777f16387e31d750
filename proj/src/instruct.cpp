#include "posbias/instruct.hpp"

#include <algorithm>
#include <cctype>

#include <nlohmann/json.hpp>

#include "posbias/error.hpp"
#include "posbias/rng.hpp"

namespace posbias {

InstructionTarget InstructionTarget::of(int a, int b) {
  if (a == b) throw MirrorError("instruction target needs two distinct documents");
  return a < b ? InstructionTarget{a, b} : InstructionTarget{b, a};
}

namespace {

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

BucketId bucket_from_name(std::string_view name) {
  for (BucketId b = 0; b < 3; ++b) {
    if (lower(bucket_name(b)) == name) return b;
  }
  const std::string_view prefix = "bucket";
  if (name.substr(0, prefix.size()) == prefix) return std::stoi(std::string(name.substr(prefix.size())));
  throw ConfigError("unknown bucket name: " + std::string(name));
}

}  // namespace

std::string UnmatchedVariant::id() const {
  switch (kind) {
    case VariantKind::Mirror:
      return "mirror-" + lower(bucket_name(bucket));
    case VariantKind::PartialGold1:
      return "partial-gold1";
    case VariantKind::PartialGold2:
      return "partial-gold2";
    case VariantKind::RandomPair:
      return "random-pair";
  }
  return {};
}

UnmatchedVariant UnmatchedVariant::parse(std::string_view id) {
  if (id == "partial-gold1") return {VariantKind::PartialGold1, -1};
  if (id == "partial-gold2") return {VariantKind::PartialGold2, -1};
  if (id == "random-pair") return {VariantKind::RandomPair, -1};
  const std::string_view prefix = "mirror-";
  if (id.substr(0, prefix.size()) == prefix) {
    return {VariantKind::Mirror, bucket_from_name(id.substr(prefix.size()))};
  }
  throw ConfigError("unknown unmatched variant: " + std::string(id));
}

std::string to_string(ConditionKind k) {
  switch (k) {
    case ConditionKind::NA:
      return "na";
    case ConditionKind::Matched:
      return "matched";
    case ConditionKind::Unmatched:
      return "unmatched";
  }
  return {};
}

std::string Condition::key() const {
  if (kind == ConditionKind::Unmatched && variant) return "unmatched:" + variant->id();
  return to_string(kind);
}

Condition Condition::parse(std::string_view key) {
  if (key == "na") return na();
  if (key == "matched") return matched();
  const std::string_view prefix = "unmatched:";
  if (key.substr(0, prefix.size()) == prefix) {
    return unmatched(UnmatchedVariant::parse(key.substr(prefix.size())));
  }
  throw ConfigError("unknown condition: " + std::string(key));
}

std::vector<int> mirror(GoldPair golds, BucketId target_bucket, const BucketSpec& spec) {
  if (spec.bucket_of(golds.first) == target_bucket || spec.bucket_of(golds.second) == target_bucket) {
    throw MirrorError("mirror target bucket " + bucket_name(target_bucket) + " holds a gold document");
  }
  const int base = spec.start(target_bucket);
  std::vector<int> out{base + spec.local_of(golds.first), base + spec.local_of(golds.second)};
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace {

std::vector<BucketId> gold_free_buckets(GoldPair golds, const BucketSpec& spec) {
  std::vector<BucketId> out;
  for (BucketId b = 0; b < spec.n_buckets; ++b) {
    if (spec.bucket_of(golds.first) != b && spec.bucket_of(golds.second) != b) out.push_back(b);
  }
  return out;
}

}  // namespace

std::uint64_t random_pair_seed(std::uint64_t global_seed, std::string_view example_id,
                               const Placement& placement) {
  std::string tag(example_id);
  tag += '|';
  tag += placement_key(placement);
  tag += "|random-pair";
  return derive_seed(global_seed, tag);
}

std::vector<VariantTarget> unmatched_variants(const Placement& placement, GoldPair golds,
                                              const BucketSpec& spec, std::uint64_t rng_seed) {
  if (gold_globals(spec, placement) != golds) {
    throw MirrorError("gold globals inconsistent with placement " + placement_key(placement));
  }
  const auto free = gold_free_buckets(golds, spec);
  if (free.empty()) throw MirrorError("no gold-free bucket available for unmatched targets");

  std::vector<VariantTarget> out;
  if (protocol_of(placement) == Protocol::Spread) {
    for (BucketId b : free) {
      const auto m = mirror(golds, b, spec);
      out.push_back({{VariantKind::Mirror, b}, InstructionTarget::of(m.at(0), m.at(1))});
    }
    return out;
  }

  const BucketId rest = free.front();
  const int mirrored_second = spec.start(rest) + spec.local_of(golds.second);
  const int mirrored_first = spec.start(rest) + spec.local_of(golds.first);
  out.push_back({{VariantKind::PartialGold1, -1}, InstructionTarget::of(golds.first, mirrored_second)});
  out.push_back({{VariantKind::PartialGold2, -1}, InstructionTarget::of(golds.second, mirrored_first)});

  SeededRng rng(rng_seed);
  const auto size = static_cast<std::size_t>(spec.bucket_size());
  const auto a = rng.below(size);
  auto b = rng.below(size - 1);
  if (b >= a) ++b;
  out.push_back({{VariantKind::RandomPair, -1},
                 InstructionTarget::of(spec.start(rest) + static_cast<int>(a),
                                       spec.start(rest) + static_cast<int>(b))});
  return out;
}

std::string render_mfai(const InstructionTarget& target) {
  const std::string x = std::to_string(target.x + 1);
  const std::string y = std::to_string(target.y + 1);
  return "The answer is in Document " + x + " and Document " + y +
         ". Use the information from Document " + x + " and Document " + y +
         " as the main reference.";
}

void to_json(nlohmann::json& j, const InstructionTarget& t) { j = {t.x, t.y}; }

nlohmann::json condition_to_json(const Condition& c, const std::optional<InstructionTarget>& t) {
  nlohmann::json j{{"kind", to_string(c.kind)}};
  if (c.variant) j["variant_id"] = c.variant->id();
  if (t) {
    j["x"] = t->x;
    j["y"] = t->y;
  }
  return j;
}

}  // namespace posbias
