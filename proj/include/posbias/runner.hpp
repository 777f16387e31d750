#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "posbias/corpus.hpp"
#include "posbias/instruct.hpp"
#include "posbias/layout.hpp"
#include "posbias/prompt.hpp"
#include "posbias/rng.hpp"

namespace posbias {

enum class Mode { Standard, Think, NoThink };
std::string to_string(Mode m);
Mode mode_from_string(const std::string& s);

enum class ModeSwitch { None, SystemTag, RequestFlag };

// How a model family toggles its reasoning mode.
struct ModelProfile {
  std::string name = "standard";
  bool dual_mode = false;
  ModeSwitch mode_switch = ModeSwitch::None;
  std::string think_tag = "<think>";
  std::string no_think_tag = "</no_think>";

  static ModelProfile standard();
  static ModelProfile dual_mode_tag();   // tag in a system message
  static ModelProfile dual_mode_flag();  // chat_template_kwargs.enable_thinking
  static ModelProfile by_name(const std::string& name);
};

struct ConditionSet {
  bool na = true;
  bool matched = true;
  bool unmatched = true;

  static ConditionSet parse(const std::string& csv);
  std::string csv() const;
};

struct RunConfig {
  BucketSpec buckets;
  std::vector<Protocol> protocols{Protocol::Spread, Protocol::Cross};
  ConditionSet conditions;
  DatasetKind dataset = DatasetKind::MuSiQue;
  std::string template_id = "musique-standard";
  std::uint64_t seed = kDefaultSeed;
  double temperature = 0.0;
  std::string model_id = "model";
  Mode mode = Mode::Standard;
  ModelProfile profile;
  std::optional<std::uint64_t> distractor_seed;  // unset: dataset order
  bool swap_gold_order = false;
  int max_tokens = 512;
};

nlohmann::json config_to_json(const RunConfig& c);
RunConfig config_from_json(const nlohmann::json& j);

// One (placement, condition) cell of the factorial grid.
struct Cell {
  Placement placement;
  Condition condition;

  std::string key() const;  // placement_key + "|" + condition key
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

// Per placement: NA, Matched, then the unmatched variants in generation order.
std::vector<Cell> enumerate_cells(const RunConfig& config);

struct TrialSpec {
  std::string id;  // example_id|cell key
  std::string example_id;
  std::size_t example_index = 0;
  Placement placement;
  Condition condition;
  std::optional<InstructionTarget> target;
  std::string prompt_hash;
  std::string model_id;
  Mode mode = Mode::Standard;

  Cell cell() const { return {placement, condition}; }
};

// Everything needed to reproduce one prompt byte-exactly.
struct TrialContext {
  ContextLayout layout;
  std::optional<InstructionTarget> target;
  RenderedPrompt prompt;
};

TrialContext build_trial(const QAExample& example, const Cell& cell, const RunConfig& config);

struct PlanSummary {
  std::size_t spread_cells = 0;
  std::size_t cross_cells = 0;
  std::size_t total_cells = 0;
  std::size_t examples = 0;
  std::size_t trials = 0;
};

struct Plan {
  PlanSummary summary;
  std::vector<Cell> cells;
  std::vector<TrialSpec> specs;  // example-major, then cell order
};

// Counts cells without touching the corpus.
PlanSummary count_cells(const RunConfig& config);

// Renders and hashes every prompt (OpenMP over trials). Throws PlanError on an
// empty corpus.
Plan plan(const std::vector<QAExample>& corpus, const RunConfig& config);

struct ChatMessage {
  std::string role;
  std::string content;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  std::uint64_t seed = kDefaultSeed;
  int max_tokens = 512;
  nlohmann::json extra = nlohmann::json::object();  // merged into the payload

  nlohmann::json payload() const;
};

ChatRequest make_request(const TrialSpec& spec, const std::string& prompt, const RunConfig& config);

// Applies the profile's think/no-think switch. Throws ConfigError when the
// profile cannot honour the mode.
void set_mode(ChatRequest& request, Mode mode, const ModelProfile& profile);

struct Completion {
  std::string text;
  std::optional<std::int64_t> completion_tokens;
  std::optional<bool> seed_echoed;
};

struct EndpointError : std::runtime_error {
  EndpointError(const std::string& what, bool retryable)
      : std::runtime_error(what), retryable(retryable) {}
  bool retryable;
};

struct TrialCall {
  const TrialSpec& spec;
  const QAExample& example;
  const ChatRequest& request;
};

class ChatEndpoint {
 public:
  virtual ~ChatEndpoint() = default;
  // Must be safe to call concurrently. Throws EndpointError.
  virtual Completion complete(const TrialCall& call) = 0;
};

// OpenAI-compatible chat completions over HTTP(S). base_url like
// "http://localhost:8000/v1"; the bearer token comes from `token_env`.
std::unique_ptr<ChatEndpoint> make_http_endpoint(const std::string& base_url,
                                                 const std::string& token_env = "OPENAI_API_KEY",
                                                 int timeout_seconds = 600);

// Parses a chat-completions response body. Throws EndpointError (not retryable).
Completion parse_chat_response(const std::string& body, std::uint64_t sent_seed);

struct TrialRecord {
  std::string spec_id;
  std::string example_id;
  std::string raw_output;
  std::int64_t completion_tokens = 0;
  std::string length_unit;  // "tokens" (endpoint) or "whitespace"
  double latency_ms = 0.0;
  std::string timestamp;
  int attempts = 0;
  Mode mode = Mode::Standard;
  std::optional<bool> seed_echoed;
  std::optional<std::string> error;

  bool ok() const { return !error.has_value(); }
};

nlohmann::json record_to_json(const TrialRecord& r);
TrialRecord record_from_json(const nlohmann::json& j);

std::int64_t whitespace_tokens(const std::string& text);

struct ExecuteOptions {
  int parallelism = 1;
  int max_retries = 2;
  int retry_backoff_ms = 0;
};

using RecordSink = std::function<void(const TrialRecord&)>;

// Runs every spec not in `done`. The sink is called under a lock, one record
// at a time. Returns the number of requests issued.
std::size_t execute(const std::vector<TrialSpec>& specs, const std::vector<QAExample>& corpus,
                    const RunConfig& config, ChatEndpoint& endpoint, const ExecuteOptions& options,
                    const std::set<std::string>& done, const RecordSink& sink);

// JSONL append log with a flush after every line.
class RecordLog {
 public:
  explicit RecordLog(const std::filesystem::path& path);
  void append(const TrialRecord& r);

 private:
  std::filesystem::path path_;
  std::unique_ptr<std::ofstream> out_;
};

// Last successful record per spec id wins; an error record is kept only when
// no success exists.
std::map<std::string, TrialRecord> read_records(const std::filesystem::path& path);

// --- run directory -----------------------------------------------------------

struct RunPaths {
  std::filesystem::path dir;
  std::filesystem::path manifest() const { return dir / "manifest.json"; }
  std::filesystem::path corpus() const { return dir / "corpus.jsonl"; }
  std::filesystem::path records() const { return dir / "records.jsonl"; }
  std::filesystem::path scores() const { return dir / "scores.jsonl"; }
};

struct RunManifest {
  RunConfig config;
  std::string dataset_source;
  std::string dataset_digest;  // sha256 of the corpus cache
  PlanSummary summary;
  std::vector<std::pair<std::string, std::string>> trials;  // (spec id, prompt hash)
  std::string completion_bitmap;                           // hex, bit i = trial i done

  std::string trial_index_digest() const;
  std::string config_digest() const;
};

nlohmann::json manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);

// Writes corpus cache + manifest for a fresh run.
RunManifest init_run(const RunPaths& paths, const std::vector<QAExample>& corpus,
                     const RunConfig& config, const std::string& dataset_source, const Plan& plan);

struct LoadedRun {
  RunManifest manifest;
  std::vector<QAExample> corpus;
  Plan plan;
};

// Re-plans from the manifest and corpus cache; throws PlanError if the trial
// index no longer matches.
LoadedRun load_run(const RunPaths& paths);

std::string completion_bitmap(const std::vector<TrialSpec>& specs,
                              const std::map<std::string, TrialRecord>& records);
void update_completion(const RunPaths& paths, RunManifest& manifest,
                       const std::vector<TrialSpec>& specs,
                       const std::map<std::string, TrialRecord>& records);

struct RunStatus {
  std::size_t total = 0;
  std::size_t completed = 0;
  std::size_t failed = 0;
  std::size_t pending = 0;
};

RunStatus run_status(const std::vector<TrialSpec>& specs,
                     const std::map<std::string, TrialRecord>& records);

}  // namespace posbias
