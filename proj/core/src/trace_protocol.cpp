#include "prefforge/trace_protocol.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <optional>

#include <json.hpp>

#include "prefforge/errors.hpp"
#include "prefforge/util.hpp"

namespace prefforge {

namespace {

using nlohmann::json;

constexpr std::string_view kOpenTag = "<score>";
constexpr std::string_view kCloseTag = "</score>";
// Some emitters escape the slash; accepted on input, never produced.
constexpr std::string_view kCloseTagAlt = "<\\score>";

std::optional<double> parse_number(std::string_view text) {
  std::string t = trim(text);
  if (t.empty()) return std::nullopt;
  double value = 0.0;
  const char* begin = t.data();
  const char* end = begin + t.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  if (!std::isfinite(value)) return std::nullopt;
  return value;
}

// The span of the last complete <score>...</score> pair, or npos.
std::optional<std::pair<std::size_t, std::size_t>> last_tag_content(
    std::string_view text) {
  std::optional<std::pair<std::size_t, std::size_t>> found;
  std::size_t pos = 0;
  while (true) {
    std::size_t open = text.find(kOpenTag, pos);
    if (open == std::string_view::npos) break;
    std::size_t content = open + kOpenTag.size();
    std::size_t close_std = text.find(kCloseTag, content);
    std::size_t close_alt = text.find(kCloseTagAlt, content);
    std::size_t close = std::min(close_std, close_alt);
    if (close != std::string_view::npos) found = {content, close};
    pos = content;
  }
  return found;
}

// Matching ']' for the '[' at `open`, honoring strings and escapes.
std::size_t matching_bracket(std::string_view text, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    char c = text[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '[' || c == '{') {
      ++depth;
    } else if (c == ']' || c == '}') {
      --depth;
      if (depth == 0 && c == ']') return i;
      if (depth < 0) return std::string_view::npos;
    }
  }
  return std::string_view::npos;
}

struct VerdictArray {
  json entries;
  std::size_t begin = 0;  // offset of '[' in the raw text
};

// Last JSON array in the text whose entries all look like verdicts.
std::optional<VerdictArray> find_verdict_array(std::string_view text) {
  std::optional<VerdictArray> found;
  std::size_t pos = 0;
  while (true) {
    std::size_t open = text.find('[', pos);
    if (open == std::string_view::npos) break;
    pos = open + 1;
    std::size_t close = matching_bracket(text, open);
    if (close == std::string_view::npos) continue;
    json j = json::parse(text.substr(open, close - open + 1), nullptr,
                         /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_array() || j.empty()) continue;
    bool shape_ok = true;
    for (const auto& e : j) {
      if (!e.is_object() || !e.contains("question") || !e.contains("score")) {
        shape_ok = false;
        break;
      }
    }
    if (shape_ok) found = VerdictArray{std::move(j), open};
  }
  return found;
}

std::string question_text(const Principle& p) { return p.text; }

}  // namespace

ScoreExtraction extract_score(const RawTraceText& raw) {
  auto span = last_tag_content(raw.text);
  if (!span)
    throw Error(Errc::score_missing, "no complete score tag in trace text");
  std::string_view content =
      std::string_view(raw.text).substr(span->first, span->second - span->first);
  auto value = parse_number(content);
  if (!value)
    throw Error(Errc::score_unparseable,
                "score tag content is not a number: \"" + trim(content) + "\"");
  ScoreExtraction out;
  out.value = *value;
  if (out.value < 0.0) {
    out.value = 0.0;
    out.clamped = true;
  } else if (out.value > 10.0) {
    out.value = 10.0;
    out.clamped = true;
  }
  return out;
}

std::vector<PrincipleVerdict> parse_verdicts(const RawTraceText& raw,
                                             const PrincipleSet& principles) {
  validate(principles);
  auto array = find_verdict_array(raw.text);
  if (!array)
    throw Error(Errc::verdict_missing,
                "no verdict array found in trace text");

  struct Entry {
    std::string question;
    json score;
    std::string reason;
    bool used = false;
  };
  std::vector<Entry> entries;
  entries.reserve(array->entries.size());
  for (const auto& e : array->entries) {
    Entry entry;
    if (!e.at("question").is_string())
      throw Error(Errc::parse_error, "verdict question must be a string");
    entry.question = e.at("question").get<std::string>();
    entry.score = e.at("score");
    if (e.contains("reason") && e.at("reason").is_string())
      entry.reason = e.at("reason").get<std::string>();
    entries.push_back(std::move(entry));
  }

  auto claim = [&](const Principle& p) -> Entry* {
    for (auto& e : entries)
      if (!e.used && e.question == question_text(p)) return &e;
    std::string norm = normalize_text(question_text(p));
    for (auto& e : entries)
      if (!e.used && normalize_text(e.question) == norm) return &e;
    return nullptr;
  };

  std::vector<PrincipleVerdict> out;
  out.reserve(principles.size());
  for (const auto& p : principles.principles) {
    Entry* entry = claim(p);
    if (!entry)
      throw Error(Errc::verdict_missing,
                  "no verdict entry matches principle " + p.id);
    entry->used = true;
    double score_value = 0.0;
    if (entry->score.is_number()) {
      score_value = entry->score.get<double>();
    } else {
      throw Error(Errc::verdict_non_binary,
                  "verdict score for principle " + p.id + " is not a number");
    }
    if (score_value != 0.0 && score_value != 1.0)
      throw Error(Errc::verdict_non_binary,
                  "verdict score for principle " + p.id + " must be 0 or 1, got " +
                      format_double(score_value));
    PrincipleVerdict v;
    v.principle_id = p.id;
    v.met = score_value == 1.0 ? 1 : 0;
    v.reason = entry->reason;
    out.push_back(std::move(v));
  }
  return out;
}

RawTraceText emit_trace(const ReasoningTrace& trace,
                        const PrincipleSet& principles) {
  validate(principles);
  if (trace.verdicts.size() != principles.size())
    throw Error(Errc::shape_mismatch,
                "trace has " + std::to_string(trace.verdicts.size()) +
                    " verdicts for " + std::to_string(principles.size()) +
                    " principles");

  auto principle_for = [&](std::size_t i,
                           const PrincipleVerdict& v) -> const Principle& {
    if (principles.principles[i].id == v.principle_id)
      return principles.principles[i];
    for (const auto& p : principles.principles)
      if (p.id == v.principle_id) return p;
    throw Error(Errc::verdict_missing,
                "verdict references unknown principle " + v.principle_id);
  };

  std::string payload = "[";
  for (std::size_t i = 0; i < trace.verdicts.size(); ++i) {
    const auto& v = trace.verdicts[i];
    const Principle& p = principle_for(i, v);
    if (i > 0) payload += ", ";
    payload += "{\"question\": " + json(question_text(p)).dump() +
               ", \"score\": " + std::to_string(v.met);
    if (!v.reason.empty()) payload += ", \"reason\": " + json(v.reason).dump();
    payload += "}";
  }
  payload += "], {\"average_score\": " + format_double(trace.average_score) +
             "} <score>" + format_double(trace.final_score) + "</score>";

  RawTraceText out;
  if (!trace.think_text.empty()) out.text = trace.think_text + "\n";
  out.text += payload;
  return out;
}

ParsedTrace parse_trace(const RawTraceText& raw, const PrincipleSet& principles) {
  ParsedTrace out;
  out.verdicts = parse_verdicts(raw, principles);
  auto array = find_verdict_array(raw.text);
  out.think_text = trim(std::string_view(raw.text).substr(0, array->begin));
  double met = 0.0;
  for (const auto& v : out.verdicts) met += v.met;
  out.average_score = met / static_cast<double>(out.verdicts.size());
  ScoreExtraction score = extract_score(raw);
  out.final_score = score.value;
  out.clamped = score.clamped;
  return out;
}

ReasoningTrace trace_from_text(const RawTraceText& raw,
                               const PrincipleSet& principles) {
  ParsedTrace parsed = parse_trace(raw, principles);
  ReasoningTrace trace;
  trace.think_text = parsed.think_text;
  trace.verdicts = std::move(parsed.verdicts);
  trace.average_score = parsed.average_score;
  trace.final_score = parsed.final_score;
  std::size_t tokens = approximate_token_count(raw.text);
  trace.token_ids.assign(tokens, 0);
  trace.token_logprobs_current.assign(tokens, 0.0);
  trace.token_logprobs_old.assign(tokens, 0.0);
  validate(trace);
  return trace;
}

double score_or_floor(const RawTraceText& raw, double floor) noexcept {
  try {
    return extract_score(raw).value;
  } catch (...) {
    return floor;
  }
}

std::size_t approximate_token_count(std::string_view text) noexcept {
  std::size_t count = 0;
  bool in_token = false;
  for (unsigned char c : text) {
    bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
                 c == '\v';
    if (!space && !in_token) ++count;
    in_token = !space;
  }
  return count == 0 ? 1 : count;
}

}  // namespace prefforge
