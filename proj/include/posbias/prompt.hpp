#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "posbias/corpus.hpp"
#include "posbias/layout.hpp"

namespace posbias {

enum class SpanKind { TaskInstruction, AttentionInstruction, Question, Options, Document, Other };
std::string to_string(SpanKind k);
SpanKind span_kind_from_string(std::string_view s);

// Character span [begin, end) into the prompt text.
struct PromptSpan {
  std::string name;  // "task_instruction", "question", "doc_3", ...
  SpanKind kind = SpanKind::Other;
  std::size_t begin = 0;
  std::size_t end = 0;
  int doc_index = -1;  // 0-based slot for document spans

  std::size_t size() const { return end - begin; }
};

struct RenderedPrompt {
  std::string text;
  std::vector<PromptSpan> spans;  // ordered by begin
  ContextLayout layout;
  std::string template_id;
  std::vector<std::string> warnings;
};

inline constexpr std::string_view kMusiqueTemplate = "musique-standard";
inline constexpr std::string_view kNeoqaTemplate1 = "neoqa-neutral-1";
inline constexpr std::string_view kNeoqaTemplate2 = "neoqa-neutral-2";

std::vector<std::string> template_ids(DatasetKind kind);

// `instruction` is the attention-instruction sentence; nullopt drops the
// instruction line entirely.
RenderedPrompt render_musique(const QAExample& example, const ContextLayout& layout,
                              const std::optional<std::string>& instruction);

RenderedPrompt render_neoqa(const QAExample& example, const ContextLayout& layout,
                            const std::optional<std::string>& instruction,
                            std::string_view template_id = kNeoqaTemplate1);

RenderedPrompt render_prompt(const QAExample& example, const ContextLayout& layout,
                             const std::optional<std::string>& instruction,
                             std::string_view template_id);

std::string format_document(int display_number, const Document& doc);
std::string format_article(const Document& doc);
std::string format_options(const std::vector<std::string>& options);

// Task instruction, optional attention instruction, question, options (NeoQA)
// and one span per document, in text order.
const std::vector<PromptSpan>& span_table(const RenderedPrompt& rendered);

nlohmann::json spans_to_json(const std::vector<PromptSpan>& spans);
std::vector<PromptSpan> spans_from_json(const nlohmann::json& j);

}  // namespace posbias
