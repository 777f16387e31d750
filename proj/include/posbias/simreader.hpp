#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "posbias/judge.hpp"
#include "posbias/runner.hpp"

// A synthetic position-biased reader. Each gold is recognised independently
// with a bucket-dependent probability; the answer is correct when both are
// recognised and synthesis succeeds.
namespace posbias::sim {

enum class SimMode { Analytic, Sampled };
std::string to_string(SimMode m);
SimMode sim_mode_from_string(const std::string& s);

struct ReaderParams {
  std::vector<double> visibility{0.9, 0.5, 0.7};  // per bucket
  double boost = 0.5;      // added to an instructed document's recognition
  double confusion = 0.5;  // multiplies synthesis under Unmatched
  double synthesis = 1.0;
  SimMode mode = SimMode::Analytic;
  std::uint64_t seed = kDefaultSeed;
  double base_length = 40.0;             // completion tokens per response
  double unmatched_length_ratio = 2.0;  // length multiplier under Unmatched

  // Throws ConfigError on out-of-range values or a bucket count mismatch.
  void validate(const BucketSpec& spec) const;
};

nlohmann::json params_to_json(const ReaderParams& p);
ReaderParams params_from_json(const nlohmann::json& j);
ReaderParams load_params(const std::filesystem::path& path);

// Minimal layout for a placement: bucket map and gold slots, placeholder ids.
ContextLayout layout_of(const Placement& placement, const BucketSpec& spec);

double recognition_prob(int doc_global, const ContextLayout& layout,
                        const std::optional<InstructionTarget>& target, const ReaderParams& params);

// s_eff · Π recognition over both golds.
double answer_prob(const ContextLayout& layout, const Condition& condition,
                   const std::optional<InstructionTarget>& target, const ReaderParams& params);

double trial_prob(const TrialSpec& spec, const BucketSpec& buckets, const ReaderParams& params);

// Draws the trial outcome from a seed derived from (params.seed, spec id).
bool sample_correct(const TrialSpec& spec, double p, const ReaderParams& params);

std::int64_t response_length(const Condition& condition, const ReaderParams& params);

// Response text judged correct (or not) by the judge for this example.
std::string render_answer(const QAExample& example, bool correct, std::uint64_t variety);

class SimulatedEndpoint : public ChatEndpoint {
 public:
  SimulatedEndpoint(BucketSpec buckets, ReaderParams params);
  Completion complete(const TrialCall& call) override;

 private:
  BucketSpec buckets_;
  ReaderParams params_;
};

// Expected accuracy per cell, one value for every cell in the plan.
CellTable analytic_cell_table(const Plan& plan, const BucketSpec& buckets, const ReaderParams& params);

// n answerable examples with 16 distractors each.
std::vector<QAExample> synthetic_corpus(DatasetKind kind, std::size_t n, std::uint64_t seed = kDefaultSeed);

struct Simulation {
  Plan plan;
  std::vector<TrialRecord> records;  // spec order
  ScoreResult scores;
  CellTable table;  // analytic sidecar in analytic mode, judged cells otherwise
};

// plan -> execute against the simulated endpoint -> judge.
Simulation simulate(const std::vector<QAExample>& corpus, const RunConfig& config, const ReaderParams& params,
                    int parallelism = 1);

}  // namespace posbias::sim
