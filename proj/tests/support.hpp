#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <unistd.h>

#include "posbias/corpus.hpp"
#include "posbias/layout.hpp"

namespace posbias::testing {

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("posbias-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Small hand-written example: two hops and 16 distractors with short bodies.
inline QAExample tiny_example(DatasetKind kind, const std::string& id = "ex1") {
  QAExample e;
  e.id = id;
  e.kind = kind;
  e.question = "Who founded the county where Lake Vista lies?";
  e.gold_docs[0] = {id + "#g1", "Lake Vista", "Lake Vista lies in Miller County.", std::nullopt};
  e.gold_docs[1] = {id + "#g2", "Miller County", "Miller County was founded by John Miller.", std::nullopt};
  for (int i = 1; i <= 16; ++i) {
    e.distractor_pool.push_back(
        {id + "#d" + std::to_string(i), "Filler " + std::to_string(i), "Filler text " + std::to_string(i) + ".",
         std::nullopt});
  }
  if (kind == DatasetKind::MuSiQue) {
    e.gold_answers = {"John Miller", "J. Miller"};
  } else {
    for (auto& d : e.gold_docs) d.date = "2030-05-01";
    for (auto& d : e.distractor_pool) d.date = "2030-04-01";
    e.options = {"Jane Doe", "John Miller", "Ann Lee", "Unanswerable"};
    e.answer_index = 1;
  }
  return e;
}

}  // namespace posbias::testing
