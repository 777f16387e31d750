#include <gtest/gtest.h>

#include <algorithm>

#include <nlohmann/json.hpp>

#include "posbias/corpus.hpp"
#include "posbias/error.hpp"
#include "support.hpp"

using namespace posbias;
using posbias::testing::TempDir;
using posbias::testing::tiny_example;
using posbias::testing::write_text;

namespace {
const std::filesystem::path kData = POSBIAS_DATA_DIR;
}

TEST(LoadMusique, FiltersAndOrdersHops) {
  const auto r = load_musique(kData / "musique_sample.jsonl");
  ASSERT_EQ(r.examples.size(), 2u);
  EXPECT_EQ(r.examples[0].id, "2hop__1");
  EXPECT_EQ(r.examples[1].id, "2hop__2");
  // 2hop__1 lists paragraph 1 as the first hop.
  EXPECT_EQ(r.examples[0].gold_docs[0].id, "2hop__1#p1");
  EXPECT_EQ(r.examples[0].gold_docs[1].id, "2hop__1#p0");
  EXPECT_EQ(r.examples[1].gold_docs[0].id, "2hop__2#p0");
  EXPECT_EQ(r.examples[0].gold_answers, (std::vector<std::string>{"Miller County", "Miller Co."}));
  EXPECT_EQ(r.examples[0].distractor_pool.size(), 18u);
  EXPECT_EQ(r.skipped, 5u);  // 3 supports, small pool, unanswerable, malformed, missing fields
}

TEST(LoadMusique, WarnsOnSmallPoolAndMalformed) {
  const auto r = load_musique(kData / "musique_sample.jsonl");
  const auto has = [&](const std::string& needle) {
    return std::any_of(r.warnings.begin(), r.warnings.end(),
                       [&](const std::string& w) { return w.find(needle) != std::string::npos; });
  };
  EXPECT_TRUE(has("only 10 distractors"));
  EXPECT_TRUE(has("malformed"));
  EXPECT_FALSE(has("3hop__1"));  // filtered silently by design
}

TEST(LoadMusique, IsIdempotent) {
  const auto a = load_musique(kData / "musique_sample.jsonl");
  const auto b = load_musique(kData / "musique_sample.jsonl");
  EXPECT_EQ(a.examples, b.examples);
}

TEST(LoadMusique, ZeroExamplesIsAnError) {
  TempDir dir;
  write_text(dir / "empty.jsonl", "{\"bad\": 1}\n");
  EXPECT_THROW(load_musique(dir / "empty.jsonl"), LoadError);
  EXPECT_THROW(load_musique(dir / "missing.jsonl"), LoadError);
}

TEST(LoadNeoqa, OptionsDatesAndEvidenceOrder) {
  const auto r = load_neoqa(kData / "neoqa_sample.json");
  ASSERT_EQ(r.examples.size(), 2u);
  const auto& e = r.examples[0];
  EXPECT_EQ(e.options.back(), "Unanswerable");
  EXPECT_EQ(e.unanswerable_index(), 3);
  EXPECT_EQ(e.answer_index, 1);
  // evidence_ids lists e1 before e0.
  EXPECT_EQ(e.gold_docs[0].id, "n1-e1");
  EXPECT_EQ(e.gold_docs[0].date, "2031-02-15");
  EXPECT_EQ(e.distractor_pool.size(), 17u);
}

TEST(LoadNeoqa, MissingUnanswerableIsFatal) {
  EXPECT_THROW(load_neoqa(kData / "neoqa_no_unanswerable.json"), LoadError);
}

TEST(LoadNeoqa, AcceptsJsonl) {
  TempDir dir;
  const auto r = load_neoqa(kData / "neoqa_sample.json");
  std::string lines;
  nlohmann::json arr = nlohmann::json::parse(posbias::testing::read_text(kData / "neoqa_sample.json"));
  for (const auto& x : arr) lines += x.dump() + "\n";
  write_text(dir / "neo.jsonl", lines);
  EXPECT_EQ(load_neoqa(dir / "neo.jsonl").examples, r.examples);
}

TEST(SelectDistractors, PrefixByDefault) {
  QAExample e = tiny_example(DatasetKind::MuSiQue);
  e.distractor_pool.push_back({"ex1#d17", "Filler 17", "x", std::nullopt});
  e.distractor_pool.push_back({"ex1#d18", "Filler 18", "x", std::nullopt});
  const auto d = select_distractors(e);
  ASSERT_EQ(d.size(), 16u);
  for (int i = 0; i < 16; ++i) EXPECT_EQ(d[static_cast<std::size_t>(i)].id, "ex1#d" + std::to_string(i + 1));
}

TEST(SelectDistractors, SeededPermutation) {
  const QAExample e = tiny_example(DatasetKind::MuSiQue);
  const auto a = select_distractors(e, 16, 42);
  EXPECT_EQ(a, select_distractors(e, 16, 42));
  const auto b = select_distractors(e, 16, 43);
  EXPECT_NE(a, b);
  auto ids = [](std::vector<Document> v) {
    std::vector<std::string> out;
    for (auto& d : v) out.push_back(d.id);
    std::sort(out.begin(), out.end());
    return out;
  };
  EXPECT_EQ(ids(a), ids(b));
  EXPECT_EQ(ids(a), ids(select_distractors(e)));
}

TEST(SelectDistractors, InsufficientPool) {
  QAExample e = tiny_example(DatasetKind::MuSiQue);
  e.distractor_pool.resize(10);
  EXPECT_THROW(select_distractors(e), AssemblyError);
}

TEST(CorpusCache, RoundTrip) {
  TempDir dir;
  const std::vector<QAExample> xs{tiny_example(DatasetKind::NeoQA, "a"), tiny_example(DatasetKind::NeoQA, "b")};
  write_corpus_cache(dir / "c.jsonl", xs, DatasetKind::NeoQA);
  EXPECT_EQ(read_corpus_cache(dir / "c.jsonl"), xs);
  const std::string text = posbias::testing::read_text(dir / "c.jsonl");
  EXPECT_EQ(text.substr(0, text.find('\n')),
            R"({"count":2,"kind":"neoqa","schema":"posbias-corpus","version":1})");
  EXPECT_EQ(serialize_corpus(xs, DatasetKind::NeoQA), text);
}
