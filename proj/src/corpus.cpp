#include "posbias/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "posbias/error.hpp"
#include "posbias/rng.hpp"

namespace posbias {

using nlohmann::json;

std::string to_string(DatasetKind k) { return k == DatasetKind::MuSiQue ? "musique" : "neoqa"; }

DatasetKind dataset_kind_from_string(const std::string& s) {
  if (s == "musique") return DatasetKind::MuSiQue;
  if (s == "neoqa") return DatasetKind::NeoQA;
  throw ConfigError("unknown dataset kind: " + s);
}

const Document* QAExample::find_doc(const std::string& doc_id) const {
  for (const auto& d : gold_docs) {
    if (d.id == doc_id) return &d;
  }
  for (const auto& d : distractor_pool) {
    if (d.id == doc_id) return &d;
  }
  return nullptr;
}

namespace {

// Thrown for questions outside the two-gold filter; not a data error.
struct NotTwoGold {};

// Reads either a JSON array or JSON lines. Unparseable lines are reported and
// skipped rather than aborting the whole file.
std::vector<json> read_records(const std::filesystem::path& path, LoadResult& result) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open dataset file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  std::vector<json> records;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '[') {
    json arr = json::parse(text, nullptr, false);
    if (arr.is_discarded()) throw LoadError("dataset file is not valid JSON: " + path.string());
    for (auto& r : arr) records.push_back(std::move(r));
    return records;
  }
  std::istringstream lines(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json r = json::parse(line, nullptr, false);
    if (r.is_discarded() || !r.is_object()) {
      result.warnings.push_back(path.filename().string() + ":" + std::to_string(lineno) +
                                ": malformed JSON, skipped");
      ++result.skipped;
      continue;
    }
    records.push_back(std::move(r));
  }
  return records;
}

void require_text(const Document& d) {
  if (d.title.empty() || d.body.empty()) {
    throw std::invalid_argument("document " + d.id + " has an empty title or body");
  }
}

bool is_unanswerable_option(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t.");
  return b != std::string::npos && s.substr(b, e - b + 1) == "unanswerable";
}

QAExample musique_example(const json& r) {
  QAExample ex;
  ex.kind = DatasetKind::MuSiQue;
  ex.id = r.at("id").get<std::string>();
  ex.question = r.at("question").get<std::string>();
  ex.gold_answers.push_back(r.at("answer").get<std::string>());
  if (r.contains("answer_aliases")) {
    for (const auto& a : r["answer_aliases"]) ex.gold_answers.push_back(a.get<std::string>());
  }

  std::vector<Document> supporting;
  std::vector<int> supporting_idx;
  for (const auto& p : r.at("paragraphs")) {
    const int idx = p.at("idx").get<int>();
    Document d{ex.id + "#p" + std::to_string(idx), p.at("title").get<std::string>(),
               p.at("paragraph_text").get<std::string>(), std::nullopt};
    require_text(d);
    if (p.value("is_supporting", false)) {
      supporting.push_back(std::move(d));
      supporting_idx.push_back(idx);
    } else {
      ex.distractor_pool.push_back(std::move(d));
    }
  }
  if (supporting.size() != 2) {
    throw NotTwoGold{};
  }

  // Hop order follows the decomposition when it names both paragraphs.
  std::vector<int> hop_order;
  if (r.contains("question_decomposition")) {
    for (const auto& step : r["question_decomposition"]) {
      if (step.contains("paragraph_support_idx") && step["paragraph_support_idx"].is_number_integer()) {
        hop_order.push_back(step["paragraph_support_idx"].get<int>());
      }
    }
  }
  if (hop_order.size() == 2 && hop_order[0] == supporting_idx[1] && hop_order[1] == supporting_idx[0]) {
    std::swap(supporting[0], supporting[1]);
  }
  ex.gold_docs = {std::move(supporting[0]), std::move(supporting[1])};
  return ex;
}

QAExample neoqa_example(const json& r) {
  QAExample ex;
  ex.kind = DatasetKind::NeoQA;
  ex.id = r.at("id").get<std::string>();
  ex.question = r.at("question").get<std::string>();
  ex.options = r.at("options").get<std::vector<std::string>>();
  ex.answer_index = r.at("answer_index").get<int>();
  if (*ex.answer_index < 0 || *ex.answer_index >= static_cast<int>(ex.options.size())) {
    throw std::out_of_range("answer_index out of range");
  }
  const auto evidence = r.at("evidence_ids").get<std::vector<std::string>>();
  if (evidence.size() != 2) {
    throw NotTwoGold{};
  }
  std::array<std::optional<Document>, 2> gold;
  for (const auto& a : r.at("articles")) {
    Document d{a.at("id").get<std::string>(), a.at("title").get<std::string>(),
               a.at("text").get<std::string>(), std::nullopt};
    if (a.contains("date") && a["date"].is_string()) d.date = a["date"].get<std::string>();
    require_text(d);
    if (d.id == evidence[0]) {
      gold[0] = std::move(d);
    } else if (d.id == evidence[1]) {
      gold[1] = std::move(d);
    } else {
      ex.distractor_pool.push_back(std::move(d));
    }
  }
  if (!gold[0] || !gold[1]) throw std::invalid_argument("evidence article missing from articles");
  ex.gold_docs = {std::move(*gold[0]), std::move(*gold[1])};
  return ex;
}

template <class Build>
LoadResult load_with(const std::filesystem::path& path, const char* label, Build build,
                     bool fatal_unanswerable) {
  LoadResult result;
  const auto records = read_records(path, result);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const json& r = records[i];
    const std::string where = std::string(label) + " record " + std::to_string(i) + " (" +
                              r.value("id", std::string("?")) + ")";
    if (fatal_unanswerable && r.contains("options") && r["options"].is_array()) {
      const auto& opts = r["options"];
      if (opts.empty() || !opts.back().is_string() ||
          !is_unanswerable_option(opts.back().get<std::string>())) {
        throw LoadError(where + ": option list does not end with an unanswerable option");
      }
    }
    if (r.contains("answerable") && r["answerable"].is_boolean() && !r["answerable"].get<bool>()) {
      ++result.skipped;
      continue;
    }
    try {
      QAExample ex = build(r);
      if (static_cast<int>(ex.distractor_pool.size()) < kDistractorCount) {
        result.warnings.push_back(where + ": only " + std::to_string(ex.distractor_pool.size()) +
                                  " distractors, excluded");
        ++result.skipped;
        continue;
      }
      result.examples.push_back(std::move(ex));
    } catch (const NotTwoGold&) {
      ++result.skipped;
    } catch (const std::exception& e) {
      result.warnings.push_back(where + ": " + e.what() + ", skipped");
      ++result.skipped;
    }
  }
  if (result.examples.empty()) {
    throw LoadError(std::string("no usable ") + label + " examples in " + path.string());
  }
  return result;
}

}  // namespace

LoadResult load_musique(const std::filesystem::path& path) {
  return load_with(path, "musique", musique_example, false);
}

LoadResult load_neoqa(const std::filesystem::path& path) {
  return load_with(path, "neoqa", neoqa_example, true);
}

LoadResult load_dataset(const std::filesystem::path& path, DatasetKind kind) {
  return kind == DatasetKind::MuSiQue ? load_musique(path) : load_neoqa(path);
}

std::vector<Document> select_distractors(const QAExample& example, int n,
                                         std::optional<std::uint64_t> seed) {
  if (n < 0 || static_cast<int>(example.distractor_pool.size()) < n) {
    throw AssemblyError("example " + example.id + " has " +
                        std::to_string(example.distractor_pool.size()) + " distractors, need " +
                        std::to_string(n));
  }
  std::vector<Document> out(example.distractor_pool.begin(), example.distractor_pool.begin() + n);
  if (seed) {
    SeededRng rng(derive_seed(*seed, example.id + "|distractors"));
    rng.shuffle(out);
  }
  return out;
}

void to_json(json& j, const Document& d) {
  j = {{"id", d.id}, {"title", d.title}, {"body", d.body}};
  if (d.date) j["date"] = *d.date;
}

void from_json(const json& j, Document& d) {
  d.id = j.at("id").get<std::string>();
  d.title = j.at("title").get<std::string>();
  d.body = j.at("body").get<std::string>();
  d.date.reset();
  if (j.contains("date")) d.date = j["date"].get<std::string>();
}

void to_json(json& j, const QAExample& e) {
  j = {{"id", e.id},
       {"kind", to_string(e.kind)},
       {"question", e.question},
       {"gold_answers", e.gold_answers},
       {"gold_docs", e.gold_docs},
       {"distractor_pool", e.distractor_pool}};
  if (!e.options.empty()) j["options"] = e.options;
  if (e.answer_index) j["answer_index"] = *e.answer_index;
}

void from_json(const json& j, QAExample& e) {
  e.id = j.at("id").get<std::string>();
  e.kind = dataset_kind_from_string(j.at("kind").get<std::string>());
  e.question = j.at("question").get<std::string>();
  e.gold_answers = j.at("gold_answers").get<std::vector<std::string>>();
  e.gold_docs = j.at("gold_docs").get<std::array<Document, 2>>();
  e.distractor_pool = j.at("distractor_pool").get<std::vector<Document>>();
  e.options = j.value("options", std::vector<std::string>{});
  e.answer_index.reset();
  if (j.contains("answer_index")) e.answer_index = j["answer_index"].get<int>();
}

std::string serialize_corpus(const std::vector<QAExample>& examples, DatasetKind kind) {
  std::string out = json{{"schema", "posbias-corpus"},
                         {"version", kCorpusSchemaVersion},
                         {"kind", to_string(kind)},
                         {"count", examples.size()}}
                        .dump();
  out += '\n';
  for (const auto& e : examples) {
    out += json(e).dump();
    out += '\n';
  }
  return out;
}

void write_corpus_cache(const std::filesystem::path& path, const std::vector<QAExample>& examples,
                        DatasetKind kind) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write corpus cache " + path.string());
  out << serialize_corpus(examples, kind);
}

std::vector<QAExample> read_corpus_cache(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open corpus cache " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw LoadError("empty corpus cache " + path.string());
  const json header = json::parse(line, nullptr, false);
  if (header.is_discarded() || header.value("schema", "") != "posbias-corpus" ||
      header.value("version", 0) != kCorpusSchemaVersion) {
    throw LoadError("unsupported corpus cache header in " + path.string());
  }
  std::vector<QAExample> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(json::parse(line).get<QAExample>());
  }
  if (out.size() != header.value("count", std::size_t{0})) {
    throw LoadError("corpus cache count mismatch in " + path.string());
  }
  return out;
}

}  // namespace posbias
