#include <fstream>
#include <sstream>

#include "posbias/digest.hpp"
#include "posbias/error.hpp"
#include "posbias/runner.hpp"

namespace posbias {

using nlohmann::json;

namespace {

json summary_to_json(const PlanSummary& s) {
  return {{"spread_cells", s.spread_cells}, {"cross_cells", s.cross_cells},
          {"total_cells", s.total_cells},   {"examples", s.examples},
          {"trials", s.trials}};
}

PlanSummary summary_from_json(const json& j) {
  PlanSummary s;
  s.spread_cells = j.at("spread_cells").get<std::size_t>();
  s.cross_cells = j.at("cross_cells").get<std::size_t>();
  s.total_cells = j.at("total_cells").get<std::size_t>();
  s.examples = j.at("examples").get<std::size_t>();
  s.trials = j.at("trials").get<std::size_t>();
  return s;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << text;
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

std::string RunManifest::trial_index_digest() const {
  std::string buf;
  for (const auto& [id, hash] : trials) {
    buf += id;
    buf += '\t';
    buf += hash;
    buf += '\n';
  }
  return sha256_hex(buf);
}

std::string RunManifest::config_digest() const {
  const json pinned{{"config", config_to_json(config)},
                    {"dataset_digest", dataset_digest},
                    {"trial_index_digest", trial_index_digest()}};
  return sha256_hex(pinned.dump());
}

json manifest_to_json(const RunManifest& m) {
  json trials = json::array();
  for (const auto& [id, hash] : m.trials) trials.push_back({id, hash});
  return {{"schema", "posbias-run"},
          {"version", 1},
          {"config", config_to_json(m.config)},
          {"dataset", {{"source", m.dataset_source}, {"digest", m.dataset_digest}, {"cache", "corpus.jsonl"}}},
          {"summary", summary_to_json(m.summary)},
          {"trial_index_digest", m.trial_index_digest()},
          {"config_digest", m.config_digest()},
          {"completion_bitmap", m.completion_bitmap},
          {"trials", trials}};
}

RunManifest manifest_from_json(const json& j) {
  if (j.value("schema", "") != "posbias-run") throw PlanError("not a run manifest");
  RunManifest m;
  m.config = config_from_json(j.at("config"));
  m.dataset_source = j.at("dataset").at("source").get<std::string>();
  m.dataset_digest = j.at("dataset").at("digest").get<std::string>();
  m.summary = summary_from_json(j.at("summary"));
  m.completion_bitmap = j.value("completion_bitmap", std::string{});
  for (const auto& t : j.at("trials")) {
    m.trials.emplace_back(t.at(0).get<std::string>(), t.at(1).get<std::string>());
  }
  if (m.trial_index_digest() != j.at("trial_index_digest").get<std::string>()) {
    throw PlanError("manifest trial index digest mismatch");
  }
  return m;
}

RunManifest init_run(const RunPaths& paths, const std::vector<QAExample>& corpus,
                     const RunConfig& config, const std::string& dataset_source, const Plan& plan) {
  std::filesystem::create_directories(paths.dir);
  const std::string cache = serialize_corpus(corpus, config.dataset);
  write_text(paths.corpus(), cache);

  RunManifest m;
  m.config = config;
  m.dataset_source = dataset_source;
  m.dataset_digest = sha256_hex(cache);
  m.summary = plan.summary;
  m.trials.reserve(plan.specs.size());
  for (const auto& s : plan.specs) m.trials.emplace_back(s.id, s.prompt_hash);
  m.completion_bitmap = completion_bitmap(plan.specs, {});
  write_text(paths.manifest(), manifest_to_json(m).dump(1) + "\n");
  return m;
}

LoadedRun load_run(const RunPaths& paths) {
  std::ifstream in(paths.manifest());
  if (!in) throw PlanError("no manifest at " + paths.manifest().string());
  LoadedRun run;
  run.manifest = manifest_from_json(json::parse(in));
  if (sha256_file(paths.corpus().string()) != run.manifest.dataset_digest) {
    throw PlanError("corpus cache digest does not match the manifest");
  }
  run.corpus = read_corpus_cache(paths.corpus());
  run.plan = plan(run.corpus, run.manifest.config);
  if (run.plan.specs.size() != run.manifest.trials.size()) {
    throw PlanError("re-planned trial count differs from the manifest");
  }
  for (std::size_t i = 0; i < run.plan.specs.size(); ++i) {
    const auto& [id, hash] = run.manifest.trials[i];
    if (run.plan.specs[i].id != id || run.plan.specs[i].prompt_hash != hash) {
      throw PlanError("re-planned trial " + std::to_string(i) + " (" + id + ") differs from the manifest");
    }
  }
  return run;
}

std::string completion_bitmap(const std::vector<TrialSpec>& specs,
                              const std::map<std::string, TrialRecord>& records) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out((specs.size() + 3) / 4, '0');
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto it = records.find(specs[i].id);
    if (it == records.end() || !it->second.ok()) continue;
    const std::size_t nibble = i / 4;
    const int value = (out[nibble] <= '9' ? out[nibble] - '0' : out[nibble] - 'a' + 10) | (1 << (i % 4));
    out[nibble] = kHex[value];
  }
  return out;
}

void update_completion(const RunPaths& paths, RunManifest& manifest,
                       const std::vector<TrialSpec>& specs,
                       const std::map<std::string, TrialRecord>& records) {
  manifest.completion_bitmap = completion_bitmap(specs, records);
  write_text(paths.manifest(), manifest_to_json(manifest).dump(1) + "\n");
}

RunStatus run_status(const std::vector<TrialSpec>& specs,
                     const std::map<std::string, TrialRecord>& records) {
  RunStatus s;
  s.total = specs.size();
  for (const auto& spec : specs) {
    const auto it = records.find(spec.id);
    if (it == records.end()) {
      ++s.pending;
    } else if (it->second.ok()) {
      ++s.completed;
    } else {
      ++s.failed;
    }
  }
  return s;
}

}  // namespace posbias
