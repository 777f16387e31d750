#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "posbias/attnmap.hpp"
#include "posbias/error.hpp"

namespace posbias::attn {

using nlohmann::json;

void AttentionDump::validate() const {
  if (layers <= 0 || heads <= 0 || tokens == 0) throw DumpError("dump " + instance_id + ": empty shape");
  const std::size_t expected = static_cast<std::size_t>(layers) * static_cast<std::size_t>(heads) * tokens;
  if (weights.size() != expected) {
    throw DumpError("dump " + instance_id + ": " + std::to_string(weights.size()) + " weights, expected " +
                    std::to_string(expected));
  }
  for (int l = 0; l < layers; ++l) {
    for (int h = 0; h < heads; ++h) {
      double mass = 0.0;
      for (float w : row(l, h)) {
        if (!(w >= 0.0f) || !std::isfinite(w)) {
          throw DumpError("dump " + instance_id + ": invalid weight at layer " + std::to_string(l) +
                          ", head " + std::to_string(h));
        }
        mass += w;
      }
      if (mass > 1.0 + kRowMassTolerance) {
        throw DumpError("dump " + instance_id + ": row mass " + std::to_string(mass) + " at layer " +
                        std::to_string(l) + ", head " + std::to_string(h));
      }
    }
  }
  std::size_t prev_end = 0;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const auto& s = spans[i];
    if (s.begin >= s.end || s.end > tokens) {
      throw DumpError("dump " + instance_id + ": span " + s.name + " is empty or out of range");
    }
    if (i > 0 && s.begin < prev_end) {
      throw DumpError("dump " + instance_id + ": span " + s.name + " overlaps its predecessor");
    }
    prev_end = s.end;
  }
}

namespace {

std::uint32_t byteswap32(std::uint32_t v) {
  return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
}

}  // namespace

AttentionDump load_dump(const std::filesystem::path& dir) {
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw DumpError("missing manifest.json in " + dir.string());
  const json m = json::parse(mf, nullptr, false);
  if (m.is_discarded()) throw DumpError("unparseable manifest.json in " + dir.string());

  AttentionDump d;
  try {
    d.model_id = m.at("model_id").get<std::string>();
    d.instance_id = m.at("instance_id").get<std::string>();
    d.condition = m.at("condition").get<std::string>();
    d.layers = m.at("L").get<int>();
    d.heads = m.at("H").get<int>();
    d.tokens = m.at("T").get<std::size_t>();
    for (const auto& s : m.at("token_spans")) {
      TokenSpan t;
      t.name = s.at("name").get<std::string>();
      t.kind = span_kind_from_string(s.at("kind").get<std::string>());
      t.begin = s.at("token_start").get<std::size_t>();
      t.end = s.at("token_end").get<std::size_t>();
      t.gold = s.value("gold", false);
      t.instructed = s.value("instructed", false);
      d.spans.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    throw DumpError("bad manifest.json in " + dir.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw DumpError("bad manifest.json in " + dir.string() + ": " + e.what());
  }

  const std::size_t count = static_cast<std::size_t>(d.layers) * static_cast<std::size_t>(d.heads) * d.tokens;
  std::ifstream wf(dir / "attn.f32", std::ios::binary | std::ios::ate);
  if (!wf) throw DumpError("missing attn.f32 in " + dir.string());
  const auto bytes = static_cast<std::size_t>(wf.tellg());
  if (bytes != count * sizeof(float)) {
    throw DumpError("attn.f32 in " + dir.string() + " has " + std::to_string(bytes) + " bytes, expected " +
                    std::to_string(count * sizeof(float)));
  }
  wf.seekg(0);
  d.weights.resize(count);
  wf.read(reinterpret_cast<char*>(d.weights.data()), static_cast<std::streamsize>(bytes));
  if constexpr (std::endian::native == std::endian::big) {
    for (float& w : d.weights) {
      std::uint32_t u;
      std::memcpy(&u, &w, 4);
      u = byteswap32(u);
      std::memcpy(&w, &u, 4);
    }
  }
  d.validate();
  return d;
}

void save_dump(const std::filesystem::path& dir, const AttentionDump& dump) {
  dump.validate();
  std::filesystem::create_directories(dir);
  json spans = json::array();
  for (const auto& s : dump.spans) {
    spans.push_back({{"name", s.name},
                     {"kind", to_string(s.kind)},
                     {"token_start", s.begin},
                     {"token_end", s.end},
                     {"gold", s.gold},
                     {"instructed", s.instructed}});
  }
  const json m{{"model_id", dump.model_id}, {"instance_id", dump.instance_id}, {"condition", dump.condition},
               {"L", dump.layers},          {"H", dump.heads},                 {"T", dump.tokens},
               {"token_spans", spans}};
  std::ofstream(dir / "manifest.json") << m.dump(2) << '\n';

  std::ofstream wf(dir / "attn.f32", std::ios::binary | std::ios::trunc);
  if constexpr (std::endian::native == std::endian::big) {
    for (float w : dump.weights) {
      std::uint32_t u;
      std::memcpy(&u, &w, 4);
      u = byteswap32(u);
      wf.write(reinterpret_cast<const char*>(&u), 4);
    }
  } else {
    wf.write(reinterpret_cast<const char*>(dump.weights.data()),
             static_cast<std::streamsize>(dump.weights.size() * sizeof(float)));
  }
  if (!wf) throw DumpError("failed writing attn.f32 in " + dir.string());
}

}  // namespace posbias::attn
