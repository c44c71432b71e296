#include "prefforge/templates.hpp"

#include <filesystem>

#include "prefforge/errors.hpp"
#include "prefforge/util.hpp"

namespace prefforge {

namespace {

// Built-in prompt texts. Deliberately plain: deployments replace these with
// tuned prompts via --templates; the engine only relies on the placeholder
// names and the reply formats described below.

constexpr const char* kDecomposeTemplate =
    "You are given an editing instruction for a reference sample.\n"
    "Instruction: {{EDIT_INSTRUCTION}}\n"
    "\n"
    "Break the instruction down into ten concrete yes/no checks covering\n"
    "three aspects: checks that untouched content is preserved, checks that\n"
    "each requested change was carried out, and checks on the overall\n"
    "quality of the result.\n"
    "Reply with a JSON array of objects, each {\"question\": \"...\",\n"
    "\"category\": \"Keep\"|\"Follow\"|\"Quality\"}.\n";

constexpr const char* kScoreTemplate =
    "Evaluate the edited sample against the checklist below.\n"
    "Instruction: {{EDIT_INSTRUCTION}}\n"
    "Checklist:\n"
    "{{QUESTION_POINTS}}\n"
    "\n"
    "Think through the evidence first. Then answer every checklist question\n"
    "with 1 (satisfied) or 0 (not satisfied), as a JSON array of\n"
    "{\"question\": \"...\", \"score\": 0|1} objects, followed by\n"
    "{\"average_score\": <mean of the scores>} and a final overall rating\n"
    "from 0 to 10 wrapped as <score>rating</score>.\n";

constexpr const char* kVerifyTemplate =
    "You are auditing a draft evaluation of an edited sample.\n"
    "Instruction: {{EDIT_INSTRUCTION}}\n"
    "Checklist:\n"
    "{{QUESTION_POINTS}}\n"
    "Draft evaluation:\n"
    "{{CoT}}\n"
    "\n"
    "Decide the correct answer for every checklist question yourself.\n"
    "Reply with {\"gold\": [{\"question\": \"...\", \"gold\": 0|1,\n"
    "\"reason\": \"...\"}, ...]} keeping the checklist order.\n";

}  // namespace

TemplateRegistry TemplateRegistry::with_defaults() {
  TemplateRegistry reg;
  reg.set("decompose", kDecomposeTemplate);
  reg.set("score", kScoreTemplate);
  reg.set("verify", kVerifyTemplate);
  return reg;
}

void TemplateRegistry::set(std::string name, std::string text) {
  templates_[std::move(name)] = std::move(text);
}

void TemplateRegistry::load_directory(const std::string& dir) {
  std::error_code ec;
  std::filesystem::directory_iterator it(dir, ec);
  if (ec)
    throw Error(Errc::io_error, "cannot read template directory: " + dir);
  for (const auto& entry : it) {
    if (!entry.is_regular_file()) continue;
    const auto& path = entry.path();
    if (path.extension() != ".txt") continue;
    set(path.stem().string(), read_file(path.string()));
  }
}

const std::string& TemplateRegistry::get(std::string_view name) const {
  auto it = templates_.find(name);
  if (it == templates_.end())
    throw Error(Errc::unknown_key, "no template named " + std::string(name));
  return it->second;
}

bool TemplateRegistry::contains(std::string_view name) const {
  return templates_.find(name) != templates_.end();
}

std::string render_template(std::string_view text,
                            const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t open = text.find("{{", pos);
    if (open == std::string_view::npos) {
      out.append(text.substr(pos));
      break;
    }
    std::size_t close = text.find("}}", open + 2);
    if (close == std::string_view::npos) {
      out.append(text.substr(pos));
      break;
    }
    out.append(text.substr(pos, open - pos));
    std::string key(text.substr(open + 2, close - open - 2));
    auto it = vars.find(key);
    if (it != vars.end()) {
      out.append(it->second);
    } else {
      out.append(text.substr(open, close + 2 - open));
    }
    pos = close + 2;
  }
  return out;
}

}  // namespace prefforge
