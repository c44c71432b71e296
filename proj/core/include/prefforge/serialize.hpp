#ifndef PREFFORGE_SERIALIZE_HPP_
#define PREFFORGE_SERIALIZE_HPP_

#include <string>
#include <string_view>
#include <vector>

#include "prefforge/domain.hpp"

namespace prefforge {

// JSONL codec. Every encoder emits one object on one line with a top-level
// schema version field "v": 1 and field names matching the domain types.
// Decoders validate invariants and reject records whose "v" is unknown.

std::string encode(const Principle& p);
std::string encode(const PrincipleSet& set);
std::string encode(const EditContext& ctx);
std::string encode(const Quadruple& quad);
std::string encode(const PrincipleVerdict& verdict);
std::string encode(const ReasoningTrace& trace);
std::string encode(const PreferencePair& pair);
std::string encode(const RolloutGroup& group);
std::string encode(const OptimizerConfig& cfg);
std::string encode(const ContextRecord& record);

Principle decode_principle(std::string_view line);
PrincipleSet decode_principle_set(std::string_view line);
EditContext decode_edit_context(std::string_view line);
Quadruple decode_quadruple(std::string_view line);
PrincipleVerdict decode_principle_verdict(std::string_view line);
ReasoningTrace decode_reasoning_trace(std::string_view line);
PreferencePair decode_preference_pair(std::string_view line);
RolloutGroup decode_rollout_group(std::string_view line);
OptimizerConfig decode_optimizer_config(std::string_view line);
ContextRecord decode_context_record(std::string_view line);

// Reads a JSONL file, skipping blank lines, and decodes each line with the
// given decoder. Throws Error{io_error} when the file cannot be read and
// Error{parse_error} on a bad line (message includes the line number).
template <typename T>
std::vector<T> read_jsonl(const std::string& path,
                          T (*decoder)(std::string_view));

void append_jsonl_line(const std::string& path, std::string_view line);

extern template std::vector<Principle> read_jsonl(const std::string&,
                                                  Principle (*)(std::string_view));
extern template std::vector<PrincipleSet> read_jsonl(
    const std::string&, PrincipleSet (*)(std::string_view));
extern template std::vector<EditContext> read_jsonl(
    const std::string&, EditContext (*)(std::string_view));
extern template std::vector<Quadruple> read_jsonl(
    const std::string&, Quadruple (*)(std::string_view));
extern template std::vector<PreferencePair> read_jsonl(
    const std::string&, PreferencePair (*)(std::string_view));
extern template std::vector<ContextRecord> read_jsonl(
    const std::string&, ContextRecord (*)(std::string_view));

}  // namespace prefforge

#endif  // PREFFORGE_SERIALIZE_HPP_
