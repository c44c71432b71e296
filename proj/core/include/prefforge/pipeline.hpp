#ifndef PREFFORGE_PIPELINE_HPP_
#define PREFFORGE_PIPELINE_HPP_

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "prefforge/domain.hpp"
#include "prefforge/trace_protocol.hpp"

namespace prefforge {

// Cold-start curation: decompose contexts into principles, score quadruples
// with a pool of scorers, verify the candidate traces against gold verdicts,
// and select one record per quadruple for supervised fine-tuning.

/// Decomposes contexts into principle sets and produces gold verdicts.
class JudgeClient {
 public:
  virtual ~JudgeClient() = default;
  virtual PrincipleSet decompose(const EditContext& ctx) = 0;
  /// Gold verdicts for the quadruple, exactly K entries aligned with its
  /// principle set. `reference` is a candidate trace given to the verifier
  /// as context.
  virtual std::vector<PrincipleVerdict> verify(const Quadruple& quad,
                                               const ReasoningTrace& reference) = 0;
};

struct SamplingParams {
  double temperature = 1.0;
  std::string prompt_key = "score";
  std::uint64_t seed = 0;

  bool operator==(const SamplingParams&) const = default;
};

/// Produces raw trace text for a quadruple.
class ScorerClient {
 public:
  virtual ~ScorerClient() = default;
  virtual std::string id() const = 0;
  virtual RawTraceText score(const Quadruple& quad,
                             const SamplingParams& params) = 0;
};

struct Provenance {
  std::string scorer_id;
  SamplingParams sampling_params;

  bool operator==(const Provenance&) const = default;
};

struct SftRecord {
  Quadruple quadruple;
  ReasoningTrace trace;
  double verification_accuracy = 0.0;
  Provenance provenance;

  bool operator==(const SftRecord&) const = default;
};

std::string encode(const SftRecord& record);
SftRecord decode_sft_record(std::string_view line);

/// Step 1: decompose a context into verifiable principles. The returned set
/// must be nonempty and contain at least one Follow principle.
PrincipleSet decompose_principles(const EditContext& ctx, JudgeClient& judge);

struct CandidateTrace {
  ReasoningTrace trace;
  Provenance provenance;
};

struct CandidateBatch {
  std::vector<CandidateTrace> parsed;
  int failed = 0;  // outputs that did not parse; logged and dropped
};

/// Step 3: samples one candidate per (scorer, variant) combination. Parse
/// failures are dropped; zero surviving candidates throws
/// Error{all_candidates_failed}. `parallelism` bounds the scorer fan-out.
CandidateBatch sample_candidates(const Quadruple& quad,
                                 std::span<ScorerClient* const> pool,
                                 std::span<const SamplingParams> variants,
                                 int parallelism = 1);

/// Step 4 scoring rule: fraction of verdicts matching gold, position-wise.
double verification_accuracy(const ReasoningTrace& trace,
                             std::span<const PrincipleVerdict> gold);

/// Step 4 selection: the candidate with the highest verification accuracy
/// against a single shared gold verdict set (one verify call per quadruple).
/// Ties break to the shorter trace, then the earlier candidate index.
SftRecord select_sft_record(std::span<const CandidateTrace> candidates,
                            const Quadruple& quad, JudgeClient& judge);

/// Flags contexts that need complex, multi-step edits ("Hard" curation).
class HardCaseFilter {
 public:
  virtual ~HardCaseFilter() = default;
  virtual bool is_complex(const EditContext& ctx) = 0;
};

enum class CurateMode { Random, Hard };

struct CurateOptions {
  double ratio = 1.0;  // Random mode: fraction kept (rounded count)
  std::uint64_t seed = 0;
};

/// Partitions a context stream. Random mode keeps round(ratio * n) contexts
/// chosen by seeded reservoir sampling, in input order. Hard mode keeps the
/// contexts the filter flags complex and requires a filter.
std::vector<EditContext> curate_split(std::span<const EditContext> samples,
                                      CurateMode mode,
                                      const CurateOptions& options,
                                      HardCaseFilter* filter = nullptr);

/// Append-only JSONL store with key-based dedup, so interrupted runs resume
/// without duplicating records. Writes are serialized.
class RecordStore {
 public:
  RecordStore(std::string path);

  /// True when `key` was newly inserted and the line appended.
  bool append_once(const std::string& key, std::string_view line);
  bool contains(const std::string& key) const;
  std::size_t size() const;

  static std::string candidate_key(const Quadruple& quad,
                                   const std::string& scorer_id,
                                   const SamplingParams& params);

 private:
  std::string path_;
  std::set<std::string> keys_;
  mutable std::mutex mutex_;
};

struct PipelineOptions {
  int parallelism = 1;
  std::vector<SamplingParams> variants = {SamplingParams{}};
};

struct PipelineReport {
  int contexts = 0;
  int decomposed = 0;
  int quadruples = 0;
  int candidates = 0;
  int parse_failures = 0;
  int selected = 0;
};

/// Runs steps over the context records into `out_dir`
/// (principles.jsonl / candidates.jsonl / sft.jsonl). Steps are resumable:
/// existing keys are skipped. `step` is one of decompose|score|verify|
/// select|all; verify and select are a single pass (selection embeds the
/// verification accuracies).
PipelineReport run_pipeline(std::span<const ContextRecord> records,
                            const std::string& step, JudgeClient& judge,
                            std::span<ScorerClient* const> scorers,
                            const std::string& out_dir,
                            const PipelineOptions& options = {});

}  // namespace prefforge

#endif  // PREFFORGE_PIPELINE_HPP_
