#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace posbias {

enum class DatasetKind { MuSiQue, NeoQA };
std::string to_string(DatasetKind k);
DatasetKind dataset_kind_from_string(const std::string& s);

struct Document {
  std::string id;
  std::string title;
  std::string body;
  std::optional<std::string> date;  // ISO yyyy-mm-dd, NeoQA only

  friend bool operator==(const Document&, const Document&) = default;
};

struct QAExample {
  std::string id;
  DatasetKind kind = DatasetKind::MuSiQue;
  std::string question;
  std::vector<std::string> gold_answers;  // MuSiQue: answer followed by aliases
  std::vector<std::string> options;       // NeoQA: last one is the unanswerable option
  std::optional<int> answer_index;        // NeoQA: 0-based correct option
  std::array<Document, 2> gold_docs;      // hop order
  std::vector<Document> distractor_pool;  // dataset order

  int unanswerable_index() const { return static_cast<int>(options.size()) - 1; }
  const Document* find_doc(const std::string& doc_id) const;

  friend bool operator==(const QAExample&, const QAExample&) = default;
};

inline constexpr int kDistractorCount = 16;

struct LoadResult {
  std::vector<QAExample> examples;
  std::vector<std::string> warnings;
  std::size_t skipped = 0;
};

// MuSiQue JSONL (one question per line): id, question, answer, answer_aliases,
// answerable, paragraphs[{idx, title, paragraph_text, is_supporting}],
// question_decomposition[{paragraph_support_idx}]. Keeps answerable questions
// with exactly two supporting paragraphs and at least 16 others.
LoadResult load_musique(const std::filesystem::path& path);

// NeoQA JSON array or JSONL: id, question, options[...] ending in
// "Unanswerable", answer_index (0-based), evidence_ids[...] in hop order,
// articles[{id, title, date, text}]. Keeps items with exactly two evidence
// articles and at least 16 others. A missing unanswerable option is fatal.
LoadResult load_neoqa(const std::filesystem::path& path);

LoadResult load_dataset(const std::filesystem::path& path, DatasetKind kind);

// First n of the pool in dataset order; with a seed, a permutation of that
// prefix that depends only on (example id, seed).
std::vector<Document> select_distractors(const QAExample& example, int n = kDistractorCount,
                                         std::optional<std::uint64_t> seed = std::nullopt);

// Normalized corpus cache: a header line {"schema","version","kind","count"}
// followed by one example per line.
inline constexpr int kCorpusSchemaVersion = 1;
std::string serialize_corpus(const std::vector<QAExample>& examples, DatasetKind kind);
void write_corpus_cache(const std::filesystem::path& path, const std::vector<QAExample>& examples,
                        DatasetKind kind);
std::vector<QAExample> read_corpus_cache(const std::filesystem::path& path);

void to_json(nlohmann::json& j, const Document& d);
void from_json(const nlohmann::json& j, Document& d);
void to_json(nlohmann::json& j, const QAExample& e);
void from_json(const nlohmann::json& j, QAExample& e);

}  // namespace posbias
