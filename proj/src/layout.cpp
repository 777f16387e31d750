#include "posbias/layout.hpp"

#include <nlohmann/json.hpp>

#include "posbias/error.hpp"

namespace posbias {

std::string bucket_name(BucketId b) {
  switch (b) {
    case kBeginning:
      return "Beginning";
    case kMiddle:
      return "Middle";
    case kTail:
      return "Tail";
    default:
      return "Bucket" + std::to_string(b);
  }
}

void BucketSpec::validate() const {
  if (n_docs <= 0 || n_buckets <= 0) {
    throw ConfigError("bucket geometry must be positive");
  }
  if (n_docs % n_buckets != 0) {
    throw ConfigError("n_docs=" + std::to_string(n_docs) + " is not divisible by n_buckets=" +
                      std::to_string(n_buckets));
  }
}

int BucketSpec::bucket_size() const {
  validate();
  return n_docs / n_buckets;
}

int BucketSpec::start(BucketId b) const {
  if (b < 0 || b >= n_buckets) throw ConfigError("bucket id out of range: " + std::to_string(b));
  return b * bucket_size();
}

BucketId BucketSpec::bucket_of(int global) const {
  if (global < 0 || global >= n_docs) {
    throw ConfigError("global index out of range: " + std::to_string(global));
  }
  return global / bucket_size();
}

int BucketSpec::local_of(int global) const { return global - start(bucket_of(global)); }

std::vector<IndexRange> partition(const BucketSpec& spec) {
  const int size = spec.bucket_size();
  std::vector<IndexRange> out;
  out.reserve(spec.n_buckets);
  for (int b = 0; b < spec.n_buckets; ++b) out.push_back({b * size, (b + 1) * size});
  return out;
}

std::string to_string(Protocol p) { return p == Protocol::Spread ? "spread" : "cross"; }

Protocol protocol_from_string(const std::string& s) {
  if (s == "spread") return Protocol::Spread;
  if (s == "cross") return Protocol::Cross;
  throw ConfigError("unknown protocol: " + s);
}

Protocol protocol_of(const Placement& p) {
  return std::holds_alternative<SpreadPlacement>(p) ? Protocol::Spread : Protocol::Cross;
}

GoldPair place_spread(const BucketSpec& spec, BucketId bucket, int distance) {
  const int size = spec.bucket_size();
  if (bucket < 0 || bucket >= spec.n_buckets) {
    throw PlacementError("spread bucket out of range: " + std::to_string(bucket));
  }
  if (distance < 1 || distance > size - 1) {
    throw PlacementError("spread distance " + std::to_string(distance) + " outside [1, " +
                         std::to_string(size - 1) + "]");
  }
  const int s = spec.start(bucket);
  return {s, s + distance};
}

GoldPair place_cross(const BucketSpec& spec, std::array<BucketId, 2> pair, int local_idx) {
  const int size = spec.bucket_size();
  if (pair[0] == pair[1]) throw PlacementError("cross placement needs two distinct buckets");
  for (BucketId b : pair) {
    if (b < 0 || b >= spec.n_buckets) {
      throw PlacementError("cross bucket out of range: " + std::to_string(b));
    }
  }
  if (pair[0] > pair[1]) throw PlacementError("cross bucket pair must be ordered (first < second)");
  if (local_idx < 0 || local_idx >= size) {
    throw PlacementError("cross local index " + std::to_string(local_idx) + " outside [0, " +
                         std::to_string(size - 1) + "]");
  }
  return {spec.start(pair[0]) + local_idx, spec.start(pair[1]) + local_idx};
}

GoldPair gold_globals(const BucketSpec& spec, const Placement& placement) {
  if (const auto* s = std::get_if<SpreadPlacement>(&placement)) {
    return place_spread(spec, s->bucket, s->distance);
  }
  const auto& c = std::get<CrossPlacement>(placement);
  return place_cross(spec, {c.first, c.second}, c.local_idx);
}

std::vector<Placement> enumerate_placements(const BucketSpec& spec, Protocol protocol) {
  const int size = spec.bucket_size();
  std::vector<Placement> out;
  if (protocol == Protocol::Spread) {
    for (BucketId b = 0; b < spec.n_buckets; ++b) {
      for (int d = 1; d < size; ++d) out.emplace_back(SpreadPlacement{b, d});
    }
  } else {
    for (BucketId b1 = 0; b1 < spec.n_buckets; ++b1) {
      for (BucketId b2 = b1 + 1; b2 < spec.n_buckets; ++b2) {
        for (int k = 0; k < size; ++k) out.emplace_back(CrossPlacement{b1, b2, k});
      }
    }
  }
  return out;
}

std::string placement_key(const Placement& p) {
  if (const auto* s = std::get_if<SpreadPlacement>(&p)) {
    return "spread:b" + std::to_string(s->bucket) + ":d" + std::to_string(s->distance);
  }
  const auto& c = std::get<CrossPlacement>(p);
  return "cross:b" + std::to_string(c.first) + "-b" + std::to_string(c.second) + ":k" +
         std::to_string(c.local_idx);
}

ContextLayout assemble(const std::array<std::string, 2>& gold_ids,
                       std::span<const std::string> distractor_ids, GoldPair gold_globals,
                       const BucketSpec& spec) {
  spec.validate();
  const int n = spec.n_docs;
  if (static_cast<int>(distractor_ids.size()) != n - 2) {
    throw AssemblyError("expected " + std::to_string(n - 2) + " distractors, got " +
                        std::to_string(distractor_ids.size()));
  }
  const auto [g1, g2] = gold_globals;
  if (g1 == g2 || g1 < 0 || g2 < 0 || g1 >= n || g2 >= n) {
    throw AssemblyError("invalid gold slots (" + std::to_string(g1) + ", " + std::to_string(g2) +
                        ")");
  }
  ContextLayout layout;
  layout.gold_globals = gold_globals;
  layout.doc_order.reserve(n);
  layout.bucket_of.reserve(n);
  auto next = distractor_ids.begin();
  for (int slot = 0; slot < n; ++slot) {
    if (slot == g1) {
      layout.doc_order.push_back(gold_ids[0]);
    } else if (slot == g2) {
      layout.doc_order.push_back(gold_ids[1]);
    } else {
      layout.doc_order.push_back(*next++);
    }
    layout.bucket_of.push_back(spec.bucket_of(slot));
  }
  return layout;
}

void to_json(nlohmann::json& j, const BucketSpec& s) {
  j = {{"n_docs", s.n_docs}, {"n_buckets", s.n_buckets}, {"bucket_size", s.bucket_size()}};
}

void from_json(const nlohmann::json& j, BucketSpec& s) {
  s.n_docs = j.at("n_docs").get<int>();
  s.n_buckets = j.at("n_buckets").get<int>();
  s.validate();
}

nlohmann::json placement_to_json(const Placement& p, const BucketSpec& spec) {
  const GoldPair g = gold_globals(spec, p);
  nlohmann::json j;
  if (const auto* s = std::get_if<SpreadPlacement>(&p)) {
    j = {{"protocol", "spread"}, {"bucket", s->bucket}, {"distance", s->distance}};
  } else {
    const auto& c = std::get<CrossPlacement>(p);
    j = {{"protocol", "cross"},
         {"buckets", {c.first, c.second}},
         {"local_idx", c.local_idx}};
  }
  j["gold_globals"] = {g.first, g.second};
  return j;
}

Placement placement_from_json(const nlohmann::json& j) {
  if (protocol_from_string(j.at("protocol").get<std::string>()) == Protocol::Spread) {
    return SpreadPlacement{j.at("bucket").get<int>(), j.at("distance").get<int>()};
  }
  const auto& b = j.at("buckets");
  return CrossPlacement{b.at(0).get<int>(), b.at(1).get<int>(), j.at("local_idx").get<int>()};
}

}  // namespace posbias
