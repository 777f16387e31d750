#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "posbias/corpus.hpp"
#include "posbias/runner.hpp"

namespace posbias {

struct MusiqueAnswer {
  bool is_answerable = false;
  std::string answer;
  friend bool operator==(const MusiqueAnswer&, const MusiqueAnswer&) = default;
};

struct NeoqaChoice {
  int index = 0;  // 1-based, as displayed
  friend bool operator==(const NeoqaChoice&, const NeoqaChoice&) = default;
};

struct Unparseable {
  friend bool operator==(const Unparseable&, const Unparseable&) = default;
};

using ParsedAnswer = std::variant<Unparseable, MusiqueAnswer, NeoqaChoice>;

// Last object in `raw` carrying an "is_answerable" field. Accepts single-quoted
// strings, trailing commas and Python-style True/False/None.
std::variant<Unparseable, MusiqueAnswer> parse_musique(std::string_view raw);

inline constexpr std::string_view kNormalizationVersion = "squad-v1";

// Lowercase, drop ASCII punctuation, drop the articles a/an/the, collapse
// whitespace.
std::string normalize(std::string_view text);

bool exact_match(std::string_view pred, const std::vector<std::string>& golds);

enum class AnswerConvention { Bracketed, BracketedOrBare };

// Bracketed "[k]" answers and the word "Unanswerable" (mapped to n_options)
// take precedence; otherwise the last bare integer in range is used.
std::variant<Unparseable, NeoqaChoice> parse_neoqa(std::string_view raw, int n_options,
                                                   AnswerConvention convention =
                                                       AnswerConvention::BracketedOrBare);

struct Judgment {
  std::string spec_id;
  std::string example_id;
  Cell cell;
  ParsedAnswer parsed;
  bool correct = false;
  bool unanswerable = false;  // is_answerable=false, or the unanswerable option
  std::int64_t response_len = 0;
  std::string length_unit;
};

Judgment judge_record(const TrialRecord& record, const TrialSpec& spec, const QAExample& example);

struct CellMetrics {
  std::size_t n = 0;
  std::size_t correct = 0;
  std::size_t parsed = 0;
  std::size_t unanswerable = 0;
  std::int64_t length_sum = 0;

  double accuracy() const { return n ? static_cast<double>(correct) / static_cast<double>(n) : 0.0; }
  double parsed_rate() const { return n ? static_cast<double>(parsed) / static_cast<double>(n) : 0.0; }
  double unparseable_rate() const {
    return n ? static_cast<double>(n - parsed) / static_cast<double>(n) : 0.0;
  }
  double unanswerable_rate() const {
    return n ? static_cast<double>(unanswerable) / static_cast<double>(n) : 0.0;
  }
  double mean_length() const {
    return n ? static_cast<double>(length_sum) / static_cast<double>(n) : 0.0;
  }
  // Half-width of the 95% normal-approximation binomial interval.
  double ci95() const;
};

// The currency of the report layer: one value per cell, whether measured by
// the judge or computed in closed form.
struct CellValue {
  double accuracy = 0.0;
  std::size_t n = 0;
  double mean_length = 0.0;
  double unanswerable_rate = 0.0;
  double ci95 = 0.0;
};

using CellTable = std::map<Cell, CellValue>;

struct ScoreResult {
  std::vector<Judgment> judgments;  // sorted by spec id
  std::map<Cell, CellMetrics> cells;
  std::size_t errored_records = 0;  // transport/endpoint failures, excluded
  std::size_t scoring_errors = 0;   // records with no matching spec, excluded
  std::vector<std::string> warnings;

  CellTable table() const;
};

ScoreResult score(const std::vector<TrialRecord>& records, const std::vector<TrialSpec>& specs,
                  const std::vector<QAExample>& corpus);

// Mean of the unmatched variant accuracies per placement.
std::map<Placement, double> rollup_unmatched(const CellTable& table);

nlohmann::json judgment_to_json(const Judgment& j);
std::string scores_jsonl(const ScoreResult& result);
std::string cell_metrics_csv(const ScoreResult& result);
nlohmann::json cell_metrics_json(const ScoreResult& result);

}  // namespace posbias
