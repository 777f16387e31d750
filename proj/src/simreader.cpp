#include "posbias/simreader.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "posbias/error.hpp"

namespace posbias::sim {

using nlohmann::json;

std::string to_string(SimMode m) { return m == SimMode::Analytic ? "analytic" : "sampled"; }

SimMode sim_mode_from_string(const std::string& s) {
  if (s == "analytic") return SimMode::Analytic;
  if (s == "sampled") return SimMode::Sampled;
  throw ConfigError("unknown simulation mode: " + s);
}

namespace {

void check_unit(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0, 1]");
}

}  // namespace

void ReaderParams::validate(const BucketSpec& spec) const {
  if (static_cast<int>(visibility.size()) != spec.n_buckets) {
    throw ConfigError("visibility has " + std::to_string(visibility.size()) + " entries for " +
                      std::to_string(spec.n_buckets) + " buckets");
  }
  for (double v : visibility) check_unit(v, "visibility");
  check_unit(boost, "boost");
  check_unit(confusion, "confusion");
  check_unit(synthesis, "synthesis");
  if (!(base_length >= 0.0) || !(unmatched_length_ratio >= 0.0)) throw ConfigError("lengths must be >= 0");
}

json params_to_json(const ReaderParams& p) {
  return {{"visibility", p.visibility},
          {"boost", p.boost},
          {"confusion", p.confusion},
          {"synthesis", p.synthesis},
          {"mode", to_string(p.mode)},
          {"seed", p.seed},
          {"base_length", p.base_length},
          {"unmatched_length_ratio", p.unmatched_length_ratio}};
}

ReaderParams params_from_json(const json& j) {
  ReaderParams p;
  try {
    p.visibility = j.value("visibility", p.visibility);
    p.boost = j.value("boost", p.boost);
    p.confusion = j.value("confusion", p.confusion);
    p.synthesis = j.value("synthesis", p.synthesis);
    p.mode = sim_mode_from_string(j.value("mode", to_string(p.mode)));
    p.seed = j.value("seed", p.seed);
    p.base_length = j.value("base_length", p.base_length);
    p.unmatched_length_ratio = j.value("unmatched_length_ratio", p.unmatched_length_ratio);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad reader params: ") + e.what());
  }
  return p;
}

ReaderParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  const json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("unparseable params file " + path.string());
  return params_from_json(j);
}

ContextLayout layout_of(const Placement& placement, const BucketSpec& spec) {
  ContextLayout l;
  l.gold_globals = gold_globals(spec, placement);
  for (int i = 0; i < spec.n_docs; ++i) {
    l.doc_order.push_back("slot-" + std::to_string(i));
    l.bucket_of.push_back(spec.bucket_of(i));
  }
  return l;
}

double recognition_prob(int doc_global, const ContextLayout& layout,
                        const std::optional<InstructionTarget>& target, const ReaderParams& params) {
  const double base = params.visibility.at(static_cast<std::size_t>(layout.bucket_of.at(doc_global)));
  if (target && target->contains(doc_global)) return std::min(1.0, base + params.boost);
  return base;
}

double answer_prob(const ContextLayout& layout, const Condition& condition,
                   const std::optional<InstructionTarget>& target, const ReaderParams& params) {
  const double s_eff =
      condition.kind == ConditionKind::Unmatched ? params.synthesis * params.confusion : params.synthesis;
  return s_eff * recognition_prob(layout.gold_globals.first, layout, target, params) *
         recognition_prob(layout.gold_globals.second, layout, target, params);
}

double trial_prob(const TrialSpec& spec, const BucketSpec& buckets, const ReaderParams& params) {
  return answer_prob(layout_of(spec.placement, buckets), spec.condition, spec.target, params);
}

bool sample_correct(const TrialSpec& spec, double p, const ReaderParams& params) {
  SeededRng rng(derive_seed(params.seed, spec.id));
  return rng.unit() < p;
}

std::int64_t response_length(const Condition& condition, const ReaderParams& params) {
  const double ratio = condition.kind == ConditionKind::Unmatched ? params.unmatched_length_ratio : 1.0;
  return std::llround(params.base_length * ratio);
}

std::string render_answer(const QAExample& example, bool correct, std::uint64_t variety) {
  if (example.kind == DatasetKind::MuSiQue) {
    const json answer = correct ? example.gold_answers.front() : "no entity " + std::to_string(variety % 1000);
    switch (variety % 4) {
      case 0:
        return json{{"is_answerable", true}, {"answer_content", answer}}.dump();
      case 1:
        return "Reasoning over the documents.\n{\"is_answerable\": true, \"answer_content\": " + answer.dump() + "}";
      case 2:
        if (!correct) return "{'is_answerable': False, 'answer_content': ''}";
        return "{'is_answerable': True, 'answer_content': " + answer.dump() + "}";
      default:
        return "```json\n{\"is_answerable\": true, \"answer_content\": " + answer.dump() + ",}\n```";
    }
  }
  const int n = static_cast<int>(example.options.size());
  const int right = example.answer_index.value_or(0) + 1;
  int pick = right;
  if (!correct) {
    if (variety % 2 == 0) {
      pick = n;  // unanswerable
    } else {
      pick = 1 + static_cast<int>((variety / 2) % static_cast<std::uint64_t>(n - 1));
      if (pick == right) pick = pick % (n - 1) + 1;
      if (pick == right) pick = n;
    }
  }
  if (variety % 3 == 0) return "[" + std::to_string(pick) + "]";
  return "After reading the articles, the answer is [" + std::to_string(pick) + "].";
}

SimulatedEndpoint::SimulatedEndpoint(BucketSpec buckets, ReaderParams params)
    : buckets_(buckets), params_(std::move(params)) {
  params_.validate(buckets_);
}

Completion SimulatedEndpoint::complete(const TrialCall& call) {
  const double p = trial_prob(call.spec, buckets_, params_);
  const bool correct = sample_correct(call.spec, p, params_);
  const std::uint64_t variety = derive_seed(params_.seed, call.spec.id + "|text");
  Completion c;
  c.text = render_answer(call.example, correct, variety);
  c.completion_tokens = response_length(call.spec.condition, params_);
  c.seed_echoed = true;
  return c;
}

CellTable analytic_cell_table(const Plan& plan, const BucketSpec& buckets, const ReaderParams& params) {
  params.validate(buckets);
  CellTable table;
  for (const auto& cell : plan.cells) {
    const ContextLayout layout = layout_of(cell.placement, buckets);
    std::optional<InstructionTarget> target;
    if (cell.condition.kind == ConditionKind::Matched) {
      target = InstructionTarget::of(layout.gold_globals.first, layout.gold_globals.second);
    } else if (cell.condition.kind == ConditionKind::Unmatched) {
      // The target depends only on the placement and variant; take it from any trial.
      for (const auto& s : plan.specs) {
        if (s.cell() == cell) {
          target = s.target;
          break;
        }
      }
    }
    CellValue v;
    v.accuracy = answer_prob(layout, cell.condition, target, params);
    v.n = plan.summary.examples;
    v.mean_length = static_cast<double>(response_length(cell.condition, params));
    table[cell] = v;
  }
  return table;
}

std::vector<QAExample> synthetic_corpus(DatasetKind kind, std::size_t n, std::uint64_t seed) {
  std::vector<QAExample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    QAExample e;
    const std::string id = "sim-" + std::to_string(i);
    SeededRng rng(derive_seed(seed, id));
    e.id = id;
    e.kind = kind;
    e.question = "Which entity links fact " + std::to_string(i) + "a and fact " + std::to_string(i) + "b?";
    const std::string answer = "entity " + std::to_string(rng.below(1000000));
    for (int h = 0; h < 2; ++h) {
      auto& d = e.gold_docs[static_cast<std::size_t>(h)];
      d.id = id + "#g" + std::to_string(h);
      d.title = "Hop " + std::to_string(h + 1);
      d.body = h == 0 ? "Fact " + std::to_string(i) + "a points to the bridge."
                      : "The bridge leads to " + answer + ".";
    }
    for (int k = 0; k < kDistractorCount; ++k) {
      Document d;
      d.id = id + "#d" + std::to_string(k);
      d.title = "Filler " + std::to_string(k);
      d.body = "Unrelated note " + std::to_string(rng.below(100000)) + ".";
      e.distractor_pool.push_back(std::move(d));
    }
    if (kind == DatasetKind::MuSiQue) {
      e.gold_answers = {answer};
    } else {
      for (auto& d : e.gold_docs) d.date = "2031-01-01";
      for (auto& d : e.distractor_pool) d.date = "2031-01-02";
      e.options = {answer, "entity alpha", "entity beta", "entity gamma"};
      rng.shuffle(e.options);
      e.options.push_back("Unanswerable");
      e.answer_index = static_cast<int>(std::find(e.options.begin(), e.options.end(), answer) - e.options.begin());
    }
    out.push_back(std::move(e));
  }
  return out;
}

Simulation simulate(const std::vector<QAExample>& corpus, const RunConfig& config, const ReaderParams& params,
                    int parallelism) {
  params.validate(config.buckets);
  Simulation sim;
  sim.plan = plan(corpus, config);
  SimulatedEndpoint endpoint(config.buckets, params);
  std::map<std::string, TrialRecord> by_id;
  ExecuteOptions opts;
  opts.parallelism = parallelism;
  execute(sim.plan.specs, corpus, config, endpoint, opts, {}, [&](const TrialRecord& r) { by_id[r.spec_id] = r; });
  sim.records.reserve(sim.plan.specs.size());
  for (const auto& s : sim.plan.specs) sim.records.push_back(by_id.at(s.id));
  sim.scores = score(sim.records, sim.plan.specs, corpus);
  sim.table = params.mode == SimMode::Analytic ? analytic_cell_table(sim.plan, config.buckets, params)
                                                : sim.scores.table();
  return sim;
}

}  // namespace posbias::sim
