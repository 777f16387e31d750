#include "posbias/judge.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

namespace posbias {

using nlohmann::json;

namespace {

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

// Index one past the brace matching raw[open], or npos.
std::size_t match_brace(std::string_view raw, std::size_t open) {
  int depth = 0;
  char quote = 0;
  for (std::size_t i = open; i < raw.size(); ++i) {
    const char c = raw[i];
    if (quote) {
      if (c == '\\') {
        ++i;
      } else if (c == quote) {
        quote = 0;
      }
      continue;
    }
    if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

// Rewrites a loosely written object into strict JSON.
std::string strictify(std::string_view s) {
  std::string out;
  out.reserve(s.size() + 8);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '"') {
      out += c;
      for (++i; i < s.size(); ++i) {
        out += s[i];
        if (s[i] == '\\' && i + 1 < s.size()) {
          out += s[++i];
        } else if (s[i] == '"') {
          break;
        }
      }
      continue;
    }
    if (c == '\'') {
      out += '"';
      for (++i; i < s.size() && s[i] != '\''; ++i) {
        if (s[i] == '\\' && i + 1 < s.size()) {
          if (s[i + 1] == '\'') {
            out += '\'';
          } else {
            out += s[i];
            out += s[i + 1];
          }
          ++i;
        } else if (s[i] == '"') {
          out += "\\\"";
        } else {
          out += s[i];
        }
      }
      out += '"';
      continue;
    }
    if (c == ',') {
      std::size_t j = i + 1;
      while (j < s.size() && std::isspace(static_cast<unsigned char>(s[j]))) ++j;
      if (j < s.size() && (s[j] == '}' || s[j] == ']')) continue;
    }
    const bool boundary = i == 0 || !is_word_char(s[i - 1]);
    if (boundary) {
      auto literal = [&](std::string_view from, std::string_view to) {
        if (s.substr(i, from.size()) == from &&
            (i + from.size() == s.size() || !is_word_char(s[i + from.size()]))) {
          out += to;
          i += from.size() - 1;
          return true;
        }
        return false;
      };
      if (literal("True", "true") || literal("False", "false") || literal("None", "null")) continue;
    }
    out += c;
  }
  return out;
}

std::optional<MusiqueAnswer> as_answer(const json& j) {
  if (!j.is_object() || !j.contains("is_answerable")) return std::nullopt;
  MusiqueAnswer a;
  const json& flag = j["is_answerable"];
  if (flag.is_boolean()) {
    a.is_answerable = flag.get<bool>();
  } else if (flag.is_string() && (flag == "true" || flag == "false")) {
    a.is_answerable = flag == "true";
  } else {
    return std::nullopt;
  }
  if (j.contains("answer_content")) {
    const json& content = j["answer_content"];
    if (content.is_string()) {
      a.answer = content.get<std::string>();
    } else if (content.is_number()) {
      a.answer = content.dump();
    } else if (!content.is_null()) {
      return std::nullopt;
    }
  }
  return a;
}

}  // namespace

std::variant<Unparseable, MusiqueAnswer> parse_musique(std::string_view raw) {
  for (std::size_t pos = raw.rfind('{'); pos != std::string_view::npos;
       pos = pos == 0 ? std::string_view::npos : raw.rfind('{', pos - 1)) {
    const std::size_t end = match_brace(raw, pos);
    if (end == std::string_view::npos) continue;
    const json j = json::parse(strictify(raw.substr(pos, end - pos)), nullptr, false);
    if (j.is_discarded()) continue;
    if (auto a = as_answer(j)) return *a;
  }
  return Unparseable{};
}

std::string normalize(std::string_view text) {
  static constexpr std::string_view kPunct = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";
  std::string cleaned;
  cleaned.reserve(text.size());
  for (char c : text) {
    if (kPunct.find(c) != std::string_view::npos) continue;
    cleaned += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  std::istringstream words(cleaned);
  std::string word;
  std::string out;
  while (words >> word) {
    if (word == "a" || word == "an" || word == "the") continue;
    if (!out.empty()) out += ' ';
    out += word;
  }
  return out;
}

bool exact_match(std::string_view pred, const std::vector<std::string>& golds) {
  const std::string p = normalize(pred);
  return std::any_of(golds.begin(), golds.end(),
                     [&](const std::string& g) { return normalize(g) == p; });
}

std::variant<Unparseable, NeoqaChoice> parse_neoqa(std::string_view raw, int n_options,
                                                   AnswerConvention convention) {
  std::optional<int> strong;  // bracketed or "unanswerable"
  std::optional<int> bare;
  for (std::size_t i = 0; i < raw.size();) {
    const char c = raw[i];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < raw.size() && std::isdigit(static_cast<unsigned char>(raw[j]))) ++j;
      const std::string_view digits = raw.substr(i, j - i);
      const char before = i > 0 ? raw[i - 1] : ' ';
      const char after = j < raw.size() ? raw[j] : ' ';
      const int value = digits.size() > 6 ? -1 : std::stoi(std::string(digits));
      const bool in_range = value >= 1 && value <= n_options;
      if (before == '[' && after == ']') {
        if (in_range) strong = value;
      } else if (!is_word_char(before) && before != '.' && !is_word_char(after) &&
                 !(after == '.' && j + 1 < raw.size() &&
                   std::isdigit(static_cast<unsigned char>(raw[j + 1])))) {
        if (in_range) bare = value;
      }
      i = j;
      continue;
    }
    if ((c == 'u' || c == 'U') && (i == 0 || !is_word_char(raw[i - 1]))) {
      static constexpr std::string_view kWord = "unanswerable";
      if (raw.size() - i >= kWord.size()) {
        bool match = true;
        for (std::size_t k = 0; k < kWord.size() && match; ++k) {
          match = std::tolower(static_cast<unsigned char>(raw[i + k])) == kWord[k];
        }
        if (match && (i + kWord.size() == raw.size() || !is_word_char(raw[i + kWord.size()]))) {
          strong = n_options;
          i += kWord.size();
          continue;
        }
      }
    }
    ++i;
  }
  if (strong) return NeoqaChoice{*strong};
  if (bare && convention == AnswerConvention::BracketedOrBare) return NeoqaChoice{*bare};
  return Unparseable{};
}

double CellMetrics::ci95() const {
  if (n == 0) return 0.0;
  const double p = accuracy();
  return 1.959963984540054 * std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

Judgment judge_record(const TrialRecord& record, const TrialSpec& spec, const QAExample& example) {
  Judgment j;
  j.spec_id = spec.id;
  j.example_id = spec.example_id;
  j.cell = spec.cell();
  j.response_len = record.completion_tokens;
  j.length_unit = record.length_unit;
  if (example.kind == DatasetKind::MuSiQue) {
    auto parsed = parse_musique(record.raw_output);
    if (const auto* a = std::get_if<MusiqueAnswer>(&parsed)) {
      j.parsed = *a;
      j.unanswerable = !a->is_answerable;
      j.correct = a->is_answerable && exact_match(a->answer, example.gold_answers);
    }
  } else {
    const int n = static_cast<int>(example.options.size());
    auto parsed = parse_neoqa(record.raw_output, n);
    if (const auto* c = std::get_if<NeoqaChoice>(&parsed)) {
      j.parsed = *c;
      j.unanswerable = c->index == n;
      j.correct = example.answer_index && c->index == *example.answer_index + 1;
    }
  }
  return j;
}

CellTable ScoreResult::table() const {
  CellTable t;
  for (const auto& [cell, m] : cells) {
    t[cell] = {m.accuracy(), m.n, m.mean_length(), m.unanswerable_rate(), m.ci95()};
  }
  return t;
}

ScoreResult score(const std::vector<TrialRecord>& records, const std::vector<TrialSpec>& specs,
                  const std::vector<QAExample>& corpus) {
  ScoreResult out;
  std::unordered_map<std::string_view, const TrialSpec*> by_id;
  by_id.reserve(specs.size());
  for (const auto& s : specs) by_id.emplace(s.id, &s);

  // Resolve joins serially, judge in parallel, accumulate in id order.
  std::vector<std::pair<const TrialRecord*, const TrialSpec*>> work;
  work.reserve(records.size());
  for (const auto& r : records) {
    if (!r.ok()) {
      ++out.errored_records;
      continue;
    }
    const auto it = by_id.find(r.spec_id);
    if (it == by_id.end() || it->second->example_index >= corpus.size() ||
        corpus[it->second->example_index].id != r.example_id) {
      ++out.scoring_errors;
      out.warnings.push_back("record " + r.spec_id + " has no matching trial; excluded");
      continue;
    }
    work.emplace_back(&r, it->second);
  }
  std::sort(work.begin(), work.end(),
            [](const auto& a, const auto& b) { return a.first->spec_id < b.first->spec_id; });
  work.erase(std::unique(work.begin(), work.end(),
                         [](const auto& a, const auto& b) { return a.first->spec_id == b.first->spec_id; }),
             work.end());

  out.judgments.resize(work.size());
  const auto n = static_cast<std::int64_t>(work.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& [rec, spec] = work[static_cast<std::size_t>(i)];
    out.judgments[static_cast<std::size_t>(i)] = judge_record(*rec, *spec, corpus[spec->example_index]);
  }

  for (const auto& j : out.judgments) {
    CellMetrics& m = out.cells[j.cell];
    ++m.n;
    m.correct += j.correct;
    m.parsed += !std::holds_alternative<Unparseable>(j.parsed);
    m.unanswerable += j.unanswerable;
    m.length_sum += j.response_len;
  }
  return out;
}

std::map<Placement, double> rollup_unmatched(const CellTable& table) {
  std::map<Placement, std::pair<double, int>> acc;
  for (const auto& [cell, v] : table) {
    if (cell.condition.kind != ConditionKind::Unmatched) continue;
    auto& [sum, count] = acc[cell.placement];
    sum += v.accuracy;
    ++count;
  }
  std::map<Placement, double> out;
  for (const auto& [p, sc] : acc) out[p] = sc.first / sc.second;
  return out;
}

json judgment_to_json(const Judgment& j) {
  json parsed;
  if (const auto* a = std::get_if<MusiqueAnswer>(&j.parsed)) {
    parsed = {{"type", "musique"}, {"is_answerable", a->is_answerable}, {"answer", a->answer}};
  } else if (const auto* c = std::get_if<NeoqaChoice>(&j.parsed)) {
    parsed = {{"type", "neoqa"}, {"index", c->index}};
  } else {
    parsed = {{"type", "unparseable"}};
  }
  return {{"spec_id", j.spec_id},
          {"example_id", j.example_id},
          {"cell", j.cell.key()},
          {"parsed", parsed},
          {"correct", j.correct},
          {"unanswerable", j.unanswerable},
          {"response_len", j.response_len},
          {"length_unit", j.length_unit},
          {"normalization", kNormalizationVersion}};
}

std::string scores_jsonl(const ScoreResult& result) {
  std::string out;
  for (const auto& j : result.judgments) {
    out += judgment_to_json(j).dump();
    out += '\n';
  }
  return out;
}

std::string cell_metrics_csv(const ScoreResult& result) {
  std::ostringstream out;
  out.precision(10);
  out << "placement,condition,n,accuracy,ci95,parsed_rate,unparseable_rate,unanswerable_rate,"
         "mean_response_len\n";
  for (const auto& [cell, m] : result.cells) {
    out << placement_key(cell.placement) << ',' << cell.condition.key() << ',' << m.n << ','
        << m.accuracy() << ',' << m.ci95() << ',' << m.parsed_rate() << ',' << m.unparseable_rate()
        << ',' << m.unanswerable_rate() << ',' << m.mean_length() << '\n';
  }
  return out.str();
}

json cell_metrics_json(const ScoreResult& result) {
  json cells = json::array();
  for (const auto& [cell, m] : result.cells) {
    cells.push_back({{"placement", placement_key(cell.placement)},
                     {"condition", cell.condition.key()},
                     {"n", m.n},
                     {"accuracy", m.accuracy()},
                     {"ci95", m.ci95()},
                     {"parsed_rate", m.parsed_rate()},
                     {"unparseable_rate", m.unparseable_rate()},
                     {"unanswerable_rate", m.unanswerable_rate()},
                     {"mean_response_len", m.mean_length()}});
  }
  json rollup = json::array();
  for (const auto& [p, acc] : rollup_unmatched(result.table())) {
    rollup.push_back({{"placement", placement_key(p)}, {"unmatched_avg_accuracy", acc}});
  }
  return {{"cells", cells},
          {"unmatched_rollup", rollup},
          {"errored_records", result.errored_records},
          {"scoring_errors", result.scoring_errors},
          {"normalization", kNormalizationVersion}};
}

}  // namespace posbias
