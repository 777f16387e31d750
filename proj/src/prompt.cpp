#include "posbias/prompt.hpp"

#include <map>

#include <nlohmann/json.hpp>

#include "posbias/error.hpp"

namespace posbias {
namespace {

constexpr std::string_view kMusiqueBody =
    "{{TASK_INSTRUCTION}}\n"
    "{{ATTENTION_INSTRUCTION}}\n"
    "\n"
    "Question: {{QUESTION}}\n"
    "\n"
    "Documents:\n"
    "{{DOCUMENTS_BLOCK}}\n"
    "\n"
    "If the documents don't have the answer, set \"is_answerable\" to false in the output "
    "dictionary. If they do, set \"is_answerable\" to true and put the answer in "
    "\"answer_content\".\n"
    "\n"
    "Please provide your answer in the following format:\n"
    "{\"is_answerable\": true/false, \"answer_content\": \"your answer here\"}";

std::string musique_task(int n_docs) {
  return "In this task, you are presented with question, and " + std::to_string(n_docs) +
         " documents that covers the answer to that question. Deduce your answer solely from the "
         "provided documents, avoiding any external data sources. Keep the answer short and "
         "concise, leave behind any irrelevant details.";
}

std::string neoqa_task(int n_docs) {
  const std::string n = std::to_string(n_docs);
  return "You are given " + n +
         " news articles and a multiple-choice question about them. The articles are referred to "
         "as Document 1 to Document " +
         n +
         " in the order in which they appear. Select the answer option that is supported by the "
         "articles.";
}

constexpr std::string_view kNeoqaBody1 =
    "{{TASK_INSTRUCTION}}\n"
    "{{ATTENTION_INSTRUCTION}}\n"
    "\n"
    "ARTICLES:\n"
    "{{NEWS_ARTICLES}}\n"
    "\n"
    "QUESTION: {{QUESTION}}\n"
    "\n"
    "ANSWERS:\n"
    "{{ANSWERS}}\n"
    "\n"
    "Answer with the number of the correct option in square brackets, for example [1]. If the "
    "articles do not provide enough information, choose the \"Unanswerable\" option.";

constexpr std::string_view kNeoqaBody2 =
    "{{TASK_INSTRUCTION}}\n"
    "{{ATTENTION_INSTRUCTION}}\n"
    "\n"
    "QUESTION: {{QUESTION}}\n"
    "\n"
    "ANSWERS:\n"
    "{{ANSWERS}}\n"
    "\n"
    "ARTICLES:\n"
    "{{NEWS_ARTICLES}}\n"
    "\n"
    "Reply with only the bracketed number of the correct option, for example [1]. If the "
    "articles do not provide enough information, choose the \"Unanswerable\" option.";

// Slot content plus spans relative to the start of the content.
struct Slot {
  std::string text;
  std::vector<PromptSpan> inner;
};

constexpr std::string_view kInstructionSlot = "{{ATTENTION_INSTRUCTION}}";

// Substitutes {{NAME}} slots. An absent attention instruction removes its whole
// line, newline included.
RenderedPrompt fill(std::string_view body, const std::map<std::string, Slot, std::less<>>& slots,
                    const std::optional<std::string>& instruction) {
  RenderedPrompt out;
  std::size_t pos = 0;
  while (pos < body.size()) {
    const auto open = body.find("{{", pos);
    if (open == std::string_view::npos) {
      out.text.append(body.substr(pos));
      break;
    }
    out.text.append(body.substr(pos, open - pos));
    const auto close = body.find("}}", open);
    if (close == std::string_view::npos) throw RenderError("unterminated template slot");
    const std::string_view token = body.substr(open, close + 2 - open);
    const std::string_view name = body.substr(open + 2, close - open - 2);
    pos = close + 2;

    if (token == kInstructionSlot) {
      if (!instruction) {
        if (pos < body.size() && body[pos] == '\n') ++pos;
        continue;
      }
      const std::size_t begin = out.text.size();
      out.text += *instruction;
      out.spans.push_back({"attention_instruction", SpanKind::AttentionInstruction, begin,
                           out.text.size(), -1});
      continue;
    }
    const auto it = slots.find(name);
    if (it == slots.end()) throw RenderError("template slot without value: " + std::string(name));
    const std::size_t base = out.text.size();
    out.text += it->second.text;
    for (PromptSpan s : it->second.inner) {
      s.begin += base;
      s.end += base;
      out.spans.push_back(std::move(s));
    }
  }
  return out;
}

Slot whole(std::string text, std::string name, SpanKind kind) {
  Slot s;
  s.inner.push_back({std::move(name), kind, 0, text.size(), -1});
  s.text = std::move(text);
  return s;
}

std::vector<const Document*> resolve_docs(const QAExample& example, const ContextLayout& layout) {
  std::vector<const Document*> docs;
  docs.reserve(layout.doc_order.size());
  for (const auto& id : layout.doc_order) {
    const Document* d = example.find_doc(id);
    if (!d) throw RenderError("document " + id + " not found in example " + example.id);
    docs.push_back(d);
  }
  return docs;
}

template <class Format>
Slot document_block(const std::vector<const Document*>& docs, Format format) {
  Slot s;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (i > 0) s.text += "\n\n";
    const std::size_t begin = s.text.size();
    s.text += format(static_cast<int>(i) + 1, *docs[i]);
    s.inner.push_back(
        {"doc_" + std::to_string(i + 1), SpanKind::Document, begin, s.text.size(), static_cast<int>(i)});
  }
  return s;
}

void check_example(const QAExample& example, const ContextLayout& layout) {
  if (example.question.empty()) throw RenderError("example " + example.id + " has no question");
  if (layout.doc_order.empty()) throw RenderError("empty context layout");
}

}  // namespace

std::string to_string(SpanKind k) {
  switch (k) {
    case SpanKind::TaskInstruction:
      return "task_instruction";
    case SpanKind::AttentionInstruction:
      return "attention_instruction";
    case SpanKind::Question:
      return "question";
    case SpanKind::Options:
      return "options";
    case SpanKind::Document:
      return "document";
    case SpanKind::Other:
      return "other";
  }
  return "other";
}

SpanKind span_kind_from_string(std::string_view s) {
  for (SpanKind k : {SpanKind::TaskInstruction, SpanKind::AttentionInstruction, SpanKind::Question,
                     SpanKind::Options, SpanKind::Document, SpanKind::Other}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown span kind: " + std::string(s));
}

std::vector<std::string> template_ids(DatasetKind kind) {
  if (kind == DatasetKind::MuSiQue) return {std::string(kMusiqueTemplate)};
  return {std::string(kNeoqaTemplate1), std::string(kNeoqaTemplate2)};
}

std::string format_document(int display_number, const Document& doc) {
  return "Document " + std::to_string(display_number) + ": " + doc.title + "\n" + doc.body;
}

std::string format_article(const Document& doc) {
  return "<article>\n<title>" + doc.title + "</title>\n<date>" + doc.date.value_or("") +
         "</date>\n<text>" + doc.body + "</text>\n</article>";
}

std::string format_options(const std::vector<std::string>& options) {
  std::string out;
  for (std::size_t i = 0; i < options.size(); ++i) {
    if (i > 0) out += '\n';
    out += "[" + std::to_string(i + 1) + "] " + options[i];
  }
  return out;
}

RenderedPrompt render_musique(const QAExample& example, const ContextLayout& layout,
                              const std::optional<std::string>& instruction) {
  check_example(example, layout);
  const auto docs = resolve_docs(example, layout);
  std::map<std::string, Slot, std::less<>> slots;
  slots["TASK_INSTRUCTION"] = whole(musique_task(layout.n_docs()), "task_instruction",
                                    SpanKind::TaskInstruction);
  slots["QUESTION"] = whole(example.question, "question", SpanKind::Question);
  slots["DOCUMENTS_BLOCK"] = document_block(docs, format_document);

  RenderedPrompt out = fill(kMusiqueBody, slots, instruction);
  out.layout = layout;
  out.template_id = std::string(kMusiqueTemplate);
  return out;
}

RenderedPrompt render_neoqa(const QAExample& example, const ContextLayout& layout,
                            const std::optional<std::string>& instruction,
                            std::string_view template_id) {
  check_example(example, layout);
  if (example.options.empty()) throw RenderError("example " + example.id + " has no options");
  std::string_view body;
  if (template_id == kNeoqaTemplate1) {
    body = kNeoqaBody1;
  } else if (template_id == kNeoqaTemplate2) {
    body = kNeoqaBody2;
  } else {
    throw RenderError("unknown NeoQA template id: " + std::string(template_id));
  }
  const auto docs = resolve_docs(example, layout);
  std::vector<std::string> warnings;
  for (const Document* d : docs) {
    if (!d->date) warnings.push_back("article " + d->id + " has no date; rendered empty");
  }

  std::map<std::string, Slot, std::less<>> slots;
  slots["TASK_INSTRUCTION"] = whole(neoqa_task(layout.n_docs()), "task_instruction",
                                    SpanKind::TaskInstruction);
  slots["QUESTION"] = whole(example.question, "question", SpanKind::Question);
  slots["ANSWERS"] = whole(format_options(example.options), "options", SpanKind::Options);
  slots["NEWS_ARTICLES"] = document_block(docs, [](int, const Document& d) { return format_article(d); });

  RenderedPrompt out = fill(body, slots, instruction);
  out.layout = layout;
  out.template_id = std::string(template_id);
  out.warnings = std::move(warnings);
  return out;
}

RenderedPrompt render_prompt(const QAExample& example, const ContextLayout& layout,
                             const std::optional<std::string>& instruction,
                             std::string_view template_id) {
  if (example.kind == DatasetKind::MuSiQue) {
    if (template_id != kMusiqueTemplate) {
      throw RenderError("unknown MuSiQue template id: " + std::string(template_id));
    }
    return render_musique(example, layout, instruction);
  }
  return render_neoqa(example, layout, instruction, template_id);
}

const std::vector<PromptSpan>& span_table(const RenderedPrompt& rendered) { return rendered.spans; }

nlohmann::json spans_to_json(const std::vector<PromptSpan>& spans) {
  auto j = nlohmann::json::array();
  for (const auto& s : spans) {
    j.push_back({{"name", s.name}, {"kind", to_string(s.kind)}, {"char_start", s.begin},
                 {"char_end", s.end}});
  }
  return j;
}

std::vector<PromptSpan> spans_from_json(const nlohmann::json& j) {
  std::vector<PromptSpan> out;
  for (const auto& s : j) {
    PromptSpan p;
    p.name = s.at("name").get<std::string>();
    p.kind = span_kind_from_string(s.at("kind").get<std::string>());
    p.begin = s.at("char_start").get<std::size_t>();
    p.end = s.at("char_end").get<std::size_t>();
    if (p.kind == SpanKind::Document && p.name.rfind("doc_", 0) == 0) {
      p.doc_index = std::stoi(p.name.substr(4)) - 1;
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace posbias
