#pragma once

#include <optional>
#include <string>
#include <vector>

// Fixed parse / normalize / exact-match cases shared by the unit and
// acceptance suites.
namespace posbias::testing {

struct MusiqueVector {
  std::string raw;
  bool parseable;
  bool is_answerable;
  std::string answer;
};

inline const std::vector<MusiqueVector> kMusiqueVectors{
    {R"({"is_answerable": true, "answer_content": "Miller County"})", true, true, "Miller County"},
    {R"(Sure! {"is_answerable": false, "answer_content": ""})", true, false, ""},
    {"The answer is Paris.", false, false, ""},
    {"{'is_answerable': True, 'answer_content': 'Miller County',}", true, true, "Miller County"},
    {"Thinking {\"scratch\": 1} then {\"is_answerable\": true, \"answer_content\": \"A\"} and finally "
     "{\"is_answerable\": true, \"answer_content\": \"B\"}",
     true, true, "B"},
    {"```json\n{\"is_answerable\": true, \"answer_content\": \"x } y\"}\n```", true, true, "x } y"},
    {R"({"is_answerable": true, "answer_content": 1912})", true, true, "1912"},
    {R"({"is_answerable": "true", "answer_content": "Oslo"})", true, true, "Oslo"},
    {R"({"answer_content": "no flag"})", false, false, ""},
    {R"({"is_answerable": true, "answer_content": "unterminated)", false, false, ""},
    {"{\"is_answerable\": None, \"answer_content\": \"x\"}", false, false, ""},
    {"{\"outer\": {\"is_answerable\": false, \"answer_content\": null}}", true, false, ""},
};

struct NormalizeVector {
  std::string in;
  std::string out;
};

inline const std::vector<NormalizeVector> kNormalizeVectors{
    {"Miller County.", "miller county"},
    {"The Miller  County", "miller county"},
    {"", ""},
    {"  An apple, a pear & THE plum!  ", "apple pear plum"},
    {"Theatre", "theatre"},
    {"U.S.A.", "usa"},
    {"Café Noir", "café noir"},
};

struct EmVector {
  std::string pred;
  std::vector<std::string> golds;
  bool match;
};

inline const std::vector<EmVector> kEmVectors{
    {"miller county.", {"Miller County"}, true},
    {"John Loudermilk", {"John D. Loudermilk"}, false},
    {"J. Miller", {"John Miller", "J. Miller"}, true},
    {"the Beatles", {"Beatles"}, true},
    {"", {"Beatles"}, false},
};

struct NeoqaVector {
  std::string raw;
  int n_options;
  std::optional<int> index;  // nullopt = unparseable
};

inline const std::vector<NeoqaVector> kNeoqaVectors{
    {"[3]", 4, 3},
    {"...the answer is 2", 4, 2},
    {"Unanswerable", 4, 4},
    {"I considered [1] but the answer is [2].", 4, 2},
    {"[7]", 4, std::nullopt},
    {"Option 3 is wrong; [1]", 4, 1},
    {"In 2023, option 2 was chosen", 4, 2},
    {"The article mentions 3.5 million people.", 4, std::nullopt},
    {"no digits here", 4, std::nullopt},
    {"[2] ... actually it is unanswerable", 5, 5},
};

}  // namespace posbias::testing
