#include "posbias/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <mutex>
#include <sstream>
#include <thread>

#include "posbias/digest.hpp"
#include "posbias/error.hpp"

namespace posbias {

using nlohmann::json;

std::string to_string(Mode m) {
  switch (m) {
    case Mode::Standard:
      return "standard";
    case Mode::Think:
      return "think";
    case Mode::NoThink:
      return "no_think";
  }
  return "standard";
}

Mode mode_from_string(const std::string& s) {
  if (s == "standard") return Mode::Standard;
  if (s == "think") return Mode::Think;
  if (s == "no_think") return Mode::NoThink;
  throw ConfigError("unknown mode: " + s);
}

ModelProfile ModelProfile::standard() { return {}; }

ModelProfile ModelProfile::dual_mode_tag() {
  ModelProfile p;
  p.name = "dual-tag";
  p.dual_mode = true;
  p.mode_switch = ModeSwitch::SystemTag;
  return p;
}

ModelProfile ModelProfile::dual_mode_flag() {
  ModelProfile p;
  p.name = "dual-flag";
  p.dual_mode = true;
  p.mode_switch = ModeSwitch::RequestFlag;
  return p;
}

ModelProfile ModelProfile::by_name(const std::string& name) {
  if (name == "standard") return standard();
  if (name == "dual-tag") return dual_mode_tag();
  if (name == "dual-flag") return dual_mode_flag();
  throw ConfigError("unknown model profile: " + name);
}

ConditionSet ConditionSet::parse(const std::string& csv) {
  ConditionSet s{false, false, false};
  std::istringstream in(csv);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    if (tok == "na") {
      s.na = true;
    } else if (tok == "matched") {
      s.matched = true;
    } else if (tok == "unmatched") {
      s.unmatched = true;
    } else if (tok == "all") {
      s = ConditionSet{};
    } else if (!tok.empty()) {
      throw ConfigError("unknown condition: " + tok);
    }
  }
  if (!s.na && !s.matched && !s.unmatched) throw ConfigError("no conditions selected");
  return s;
}

std::string ConditionSet::csv() const {
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += ',';
    out += name;
  };
  add(na, "na");
  add(matched, "matched");
  add(unmatched, "unmatched");
  return out;
}

json config_to_json(const RunConfig& c) {
  json protocols = json::array();
  for (Protocol p : c.protocols) protocols.push_back(to_string(p));
  json j{{"buckets", c.buckets},
         {"protocols", protocols},
         {"conditions", c.conditions.csv()},
         {"dataset", to_string(c.dataset)},
         {"template_id", c.template_id},
         {"seed", c.seed},
         {"temperature", c.temperature},
         {"model_id", c.model_id},
         {"mode", to_string(c.mode)},
         {"profile",
          {{"name", c.profile.name},
           {"dual_mode", c.profile.dual_mode},
           {"switch", c.profile.mode_switch == ModeSwitch::SystemTag     ? "system_tag"
                      : c.profile.mode_switch == ModeSwitch::RequestFlag ? "request_flag"
                                                                         : "none"},
           {"think_tag", c.profile.think_tag},
           {"no_think_tag", c.profile.no_think_tag}}},
         {"swap_gold_order", c.swap_gold_order},
         {"max_tokens", c.max_tokens},
         {"instruction_line_on_na", "removed"},
         {"distractor_order", c.distractor_seed ? "seeded" : "dataset"}};
  j["distractor_seed"] = c.distractor_seed ? json(*c.distractor_seed) : json(nullptr);
  return j;
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  c.buckets = j.at("buckets").get<BucketSpec>();
  c.protocols.clear();
  for (const auto& p : j.at("protocols")) c.protocols.push_back(protocol_from_string(p.get<std::string>()));
  c.conditions = ConditionSet::parse(j.at("conditions").get<std::string>());
  c.dataset = dataset_kind_from_string(j.at("dataset").get<std::string>());
  c.template_id = j.at("template_id").get<std::string>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.temperature = j.at("temperature").get<double>();
  c.model_id = j.at("model_id").get<std::string>();
  c.mode = mode_from_string(j.at("mode").get<std::string>());
  const auto& p = j.at("profile");
  c.profile.name = p.at("name").get<std::string>();
  c.profile.dual_mode = p.at("dual_mode").get<bool>();
  const auto sw = p.at("switch").get<std::string>();
  c.profile.mode_switch = sw == "system_tag"     ? ModeSwitch::SystemTag
                          : sw == "request_flag" ? ModeSwitch::RequestFlag
                                                 : ModeSwitch::None;
  c.profile.think_tag = p.at("think_tag").get<std::string>();
  c.profile.no_think_tag = p.at("no_think_tag").get<std::string>();
  c.swap_gold_order = j.at("swap_gold_order").get<bool>();
  c.max_tokens = j.at("max_tokens").get<int>();
  if (!j.at("distractor_seed").is_null()) c.distractor_seed = j["distractor_seed"].get<std::uint64_t>();
  return c;
}

std::string Cell::key() const { return placement_key(placement) + "|" + condition.key(); }

std::vector<Cell> enumerate_cells(const RunConfig& config) {
  std::vector<Cell> cells;
  for (Protocol protocol : config.protocols) {
    for (const Placement& p : enumerate_placements(config.buckets, protocol)) {
      if (config.conditions.na) cells.push_back({p, Condition::na()});
      if (config.conditions.matched) cells.push_back({p, Condition::matched()});
      if (config.conditions.unmatched) {
        const GoldPair golds = gold_globals(config.buckets, p);
        for (const auto& v : unmatched_variants(p, golds, config.buckets, config.seed)) {
          cells.push_back({p, Condition::unmatched(v.variant)});
        }
      }
    }
  }
  return cells;
}

PlanSummary count_cells(const RunConfig& config) {
  PlanSummary s;
  for (const Cell& c : enumerate_cells(config)) {
    if (protocol_of(c.placement) == Protocol::Spread) {
      ++s.spread_cells;
    } else {
      ++s.cross_cells;
    }
  }
  s.total_cells = s.spread_cells + s.cross_cells;
  return s;
}

namespace {

std::optional<InstructionTarget> target_for(const QAExample& example, const Cell& cell,
                                            const RunConfig& config, GoldPair golds) {
  switch (cell.condition.kind) {
    case ConditionKind::NA:
      return std::nullopt;
    case ConditionKind::Matched:
      return InstructionTarget::of(golds.first, golds.second);
    case ConditionKind::Unmatched:
      break;
  }
  const auto seed = random_pair_seed(config.seed, example.id, cell.placement);
  for (const auto& v : unmatched_variants(cell.placement, golds, config.buckets, seed)) {
    if (v.variant == *cell.condition.variant) return v.target;
  }
  throw PlanError("variant " + cell.condition.key() + " not available for " +
                  placement_key(cell.placement));
}

}  // namespace

TrialContext build_trial(const QAExample& example, const Cell& cell, const RunConfig& config) {
  const GoldPair golds = gold_globals(config.buckets, cell.placement);
  const auto distractors = select_distractors(example, config.buckets.n_docs - 2, config.distractor_seed);
  std::vector<std::string> distractor_ids;
  distractor_ids.reserve(distractors.size());
  for (const auto& d : distractors) distractor_ids.push_back(d.id);
  std::array<std::string, 2> gold_ids{example.gold_docs[0].id, example.gold_docs[1].id};
  if (config.swap_gold_order) std::swap(gold_ids[0], gold_ids[1]);

  TrialContext ctx;
  ctx.layout = assemble(gold_ids, distractor_ids, golds, config.buckets);
  ctx.target = target_for(example, cell, config, golds);
  std::optional<std::string> instruction;
  if (ctx.target) instruction = render_mfai(*ctx.target);
  ctx.prompt = render_prompt(example, ctx.layout, instruction, config.template_id);
  return ctx;
}

Plan plan(const std::vector<QAExample>& corpus, const RunConfig& config) {
  if (corpus.empty()) throw PlanError("cannot plan over an empty corpus");
  config.buckets.validate();

  Plan out;
  out.cells = enumerate_cells(config);
  out.summary = count_cells(config);
  out.summary.examples = corpus.size();
  out.summary.trials = out.cells.size() * corpus.size();

  const std::size_t n_cells = out.cells.size();
  out.specs.resize(out.summary.trials);
  std::string first_error;
  std::mutex error_mutex;

  const auto total = static_cast<std::int64_t>(out.specs.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::int64_t i = 0; i < total; ++i) {
    const std::size_t e = static_cast<std::size_t>(i) / n_cells;
    const Cell& cell = out.cells[static_cast<std::size_t>(i) % n_cells];
    TrialSpec& spec = out.specs[static_cast<std::size_t>(i)];
    try {
      const TrialContext ctx = build_trial(corpus[e], cell, config);
      spec.id = corpus[e].id + "|" + cell.key();
      spec.example_id = corpus[e].id;
      spec.example_index = e;
      spec.placement = cell.placement;
      spec.condition = cell.condition;
      spec.target = ctx.target;
      spec.prompt_hash = sha256_hex(ctx.prompt.text);
      spec.model_id = config.model_id;
      spec.mode = config.mode;
    } catch (const std::exception& ex) {
      std::lock_guard lock(error_mutex);
      if (first_error.empty()) first_error = corpus[e].id + ": " + ex.what();
    }
  }
  if (!first_error.empty()) throw PlanError(first_error);
  return out;
}

json ChatRequest::payload() const {
  json msgs = json::array();
  for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  json j{{"model", model},
         {"messages", msgs},
         {"temperature", temperature},
         {"seed", seed},
         {"max_tokens", max_tokens}};
  for (const auto& [k, v] : extra.items()) j[k] = v;
  return j;
}

ChatRequest make_request(const TrialSpec& spec, const std::string& prompt, const RunConfig& config) {
  ChatRequest r;
  r.model = spec.model_id;
  r.messages.push_back({"user", prompt});
  r.temperature = config.temperature;
  r.seed = config.seed;
  r.max_tokens = config.max_tokens;
  set_mode(r, spec.mode, config.profile);
  return r;
}

void set_mode(ChatRequest& request, Mode mode, const ModelProfile& profile) {
  if (mode == Mode::Standard) return;
  if (!profile.dual_mode || profile.mode_switch == ModeSwitch::None) {
    throw ConfigError("model profile '" + profile.name + "' does not support mode " + to_string(mode));
  }
  const bool think = mode == Mode::Think;
  if (profile.mode_switch == ModeSwitch::SystemTag) {
    const std::string& tag = think ? profile.think_tag : profile.no_think_tag;
    auto sys = std::find_if(request.messages.begin(), request.messages.end(),
                            [](const ChatMessage& m) { return m.role == "system"; });
    if (sys == request.messages.end()) {
      request.messages.insert(request.messages.begin(), ChatMessage{"system", tag});
    } else {
      sys->content += (sys->content.empty() ? "" : " ") + tag;
    }
  } else {
    request.extra["chat_template_kwargs"] = {{"enable_thinking", think}};
  }
}

Completion parse_chat_response(const std::string& body, std::uint64_t sent_seed) {
  const json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw EndpointError("endpoint returned non-JSON body", false);
  if (j.contains("error")) throw EndpointError("endpoint error: " + j["error"].dump(), false);
  if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
    throw EndpointError("endpoint response has no choices", false);
  }
  const auto& choice = j["choices"][0];
  if (!choice.contains("message") || !choice["message"].contains("content") ||
      !choice["message"]["content"].is_string()) {
    throw EndpointError("endpoint response has no message content", false);
  }
  Completion c;
  c.text = choice["message"]["content"].get<std::string>();
  if (j.contains("usage") && j["usage"].is_object() && j["usage"].contains("completion_tokens") &&
      j["usage"]["completion_tokens"].is_number_integer()) {
    c.completion_tokens = j["usage"]["completion_tokens"].get<std::int64_t>();
  }
  if (j.contains("seed") && j["seed"].is_number_unsigned()) {
    c.seed_echoed = j["seed"].get<std::uint64_t>() == sent_seed;
  }
  return c;
}

std::int64_t whitespace_tokens(const std::string& text) {
  std::istringstream in(text);
  std::string tok;
  std::int64_t n = 0;
  while (in >> tok) ++n;
  return n;
}

json record_to_json(const TrialRecord& r) {
  json j{{"spec_id", r.spec_id},
         {"example_id", r.example_id},
         {"raw_output", r.raw_output},
         {"completion_tokens", r.completion_tokens},
         {"length_unit", r.length_unit},
         {"latency_ms", r.latency_ms},
         {"timestamp", r.timestamp},
         {"attempts", r.attempts},
         {"mode", to_string(r.mode)}};
  if (r.seed_echoed) j["seed_echoed"] = *r.seed_echoed;
  if (r.error) j["error"] = *r.error;
  return j;
}

TrialRecord record_from_json(const json& j) {
  TrialRecord r;
  r.spec_id = j.at("spec_id").get<std::string>();
  r.example_id = j.at("example_id").get<std::string>();
  r.raw_output = j.value("raw_output", std::string{});
  r.completion_tokens = j.value("completion_tokens", std::int64_t{0});
  r.length_unit = j.value("length_unit", std::string{"tokens"});
  r.latency_ms = j.value("latency_ms", 0.0);
  r.timestamp = j.value("timestamp", std::string{});
  r.attempts = j.value("attempts", 0);
  r.mode = mode_from_string(j.value("mode", std::string{"standard"}));
  if (j.contains("seed_echoed")) r.seed_echoed = j["seed_echoed"].get<bool>();
  if (j.contains("error")) r.error = j["error"].get<std::string>();
  return r;
}

namespace {

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

TrialRecord run_one(const TrialSpec& spec, const QAExample& example, const RunConfig& config,
                    ChatEndpoint& endpoint, const ExecuteOptions& options) {
  TrialRecord rec;
  rec.spec_id = spec.id;
  rec.example_id = spec.example_id;
  rec.mode = spec.mode;

  const auto start = std::chrono::steady_clock::now();
  try {
    const TrialContext ctx = build_trial(example, spec.cell(), config);
    const ChatRequest request = make_request(spec, ctx.prompt.text, config);
    for (int attempt = 0; attempt <= options.max_retries; ++attempt) {
      rec.attempts = attempt + 1;
      try {
        const Completion c = endpoint.complete({spec, example, request});
        rec.raw_output = c.text;
        rec.seed_echoed = c.seed_echoed;
        if (c.completion_tokens) {
          rec.completion_tokens = *c.completion_tokens;
          rec.length_unit = "tokens";
        } else {
          rec.completion_tokens = whitespace_tokens(c.text);
          rec.length_unit = "whitespace";
        }
        rec.error.reset();
        break;
      } catch (const EndpointError& e) {
        rec.error = e.what();
        if (!e.retryable) break;
        if (options.retry_backoff_ms > 0 && attempt < options.max_retries) {
          std::this_thread::sleep_for(std::chrono::milliseconds(options.retry_backoff_ms << attempt));
        }
      }
    }
  } catch (const std::exception& e) {
    rec.error = std::string("trial setup failed: ") + e.what();
  }
  rec.latency_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  rec.timestamp = utc_timestamp();
  return rec;
}

}  // namespace

std::size_t execute(const std::vector<TrialSpec>& specs, const std::vector<QAExample>& corpus,
                    const RunConfig& config, ChatEndpoint& endpoint, const ExecuteOptions& options,
                    const std::set<std::string>& done, const RecordSink& sink) {
  std::vector<const TrialSpec*> todo;
  for (const auto& s : specs) {
    if (!done.count(s.id)) todo.push_back(&s);
  }
  if (todo.empty()) return 0;

  std::atomic<std::size_t> next{0};
  std::mutex sink_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < todo.size(); i = next++) {
      const TrialSpec& spec = *todo[i];
      if (spec.example_index >= corpus.size() || corpus[spec.example_index].id != spec.example_id) {
        throw PlanError("spec " + spec.id + " does not match the corpus");
      }
      TrialRecord rec = run_one(spec, corpus[spec.example_index], config, endpoint, options);
      std::lock_guard lock(sink_mutex);
      sink(rec);
    }
  };

  const int n_threads = std::max(1, std::min<int>(options.parallelism, static_cast<int>(todo.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    for (int t = 0; t < n_threads; ++t) {
      pool.emplace_back([&] {
        try {
          worker();
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = todo.size();
        }
      });
    }
    pool.clear();
    if (failure) std::rethrow_exception(failure);
  }
  return todo.size();
}

RecordLog::RecordLog(const std::filesystem::path& path)
    : path_(path), out_(std::make_unique<std::ofstream>(path, std::ios::app | std::ios::binary)) {
  if (!*out_) throw std::runtime_error("cannot open record log " + path.string());
}

void RecordLog::append(const TrialRecord& r) {
  *out_ << record_to_json(r).dump() << '\n';
  out_->flush();
}

std::map<std::string, TrialRecord> read_records(const std::filesystem::path& path) {
  std::map<std::string, TrialRecord> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) continue;  // torn final line after a crash
    TrialRecord r = record_from_json(j);
    auto it = out.find(r.spec_id);
    if (it == out.end() || r.ok() || !it->second.ok()) out[r.spec_id] = std::move(r);
  }
  return out;
}

}  // namespace posbias
