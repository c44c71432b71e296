#include "prefforge/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <map>
#include <numeric>

#include <json.hpp>

#include "prefforge/errors.hpp"
#include "prefforge/serialize.hpp"
#include "prefforge/util.hpp"

namespace prefforge {

namespace {

using nlohmann::json;

}  // namespace

PrincipleSet decompose_principles(const EditContext& ctx, JudgeClient& judge) {
  validate(ctx);
  PrincipleSet set;
  try {
    set = judge.decompose(ctx);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(Errc::judge_unavailable,
                std::string("decompose failed: ") + e.what());
  }
  if (set.principles.empty())
    throw Error(Errc::empty_decomposition,
                "judge produced no principles for: " + ctx.instruction);
  bool has_follow = false;
  for (const auto& p : set.principles) {
    validate(p);
    if (p.category == PrincipleCategory::Follow) has_follow = true;
  }
  if (!has_follow)
    throw Error(Errc::empty_decomposition,
                "decomposition carries no instruction-following principle");
  if (set.context_id.empty()) set.context_id = context_key(ctx);
  if (set.context_id != context_key(ctx))
    throw Error(Errc::invariant_violation,
                "PrincipleSet.context_id: does not match the context");
  validate(set);
  return set;
}

CandidateBatch sample_candidates(const Quadruple& quad,
                                 std::span<ScorerClient* const> pool,
                                 std::span<const SamplingParams> variants,
                                 int parallelism) {
  validate(quad);
  if (pool.empty()) throw Error(Errc::empty_batch, "scorer pool is empty");
  if (variants.empty())
    throw Error(Errc::empty_batch, "no sampling variants given");

  struct Slot {
    std::optional<CandidateTrace> candidate;
    bool failed = false;
  };
  const std::size_t jobs = pool.size() * variants.size();
  std::vector<Slot> slots(jobs);
  parallel_for(jobs, parallelism, [&](std::size_t j) {
    ScorerClient* scorer = pool[j / variants.size()];
    const SamplingParams& params = variants[j % variants.size()];
    try {
      RawTraceText text = scorer->score(quad, params);
      CandidateTrace candidate;
      candidate.trace = trace_from_text(text, quad.principles);
      candidate.provenance = Provenance{scorer->id(), params};
      slots[j].candidate = std::move(candidate);
    } catch (const std::exception& e) {
      slots[j].failed = true;
      log_message(LogLevel::warn,
                  "candidate from scorer " + scorer->id() + " dropped: " +
                      e.what());
    }
  });

  CandidateBatch batch;
  for (auto& slot : slots) {
    if (slot.candidate) {
      batch.parsed.push_back(std::move(*slot.candidate));
    } else {
      ++batch.failed;
    }
  }
  if (batch.parsed.empty())
    throw Error(Errc::all_candidates_failed,
                "every candidate failed for " + quadruple_key(quad));
  return batch;
}

double verification_accuracy(const ReasoningTrace& trace,
                             std::span<const PrincipleVerdict> gold) {
  if (gold.empty())
    throw Error(Errc::length_mismatch, "gold verdict list is empty");
  if (trace.verdicts.size() != gold.size())
    throw Error(Errc::length_mismatch,
                "trace has " + std::to_string(trace.verdicts.size()) +
                    " verdicts, gold has " + std::to_string(gold.size()));
  std::size_t agree = 0;
  for (std::size_t k = 0; k < gold.size(); ++k) {
    validate(gold[k]);
    if (trace.verdicts[k].met == gold[k].met) ++agree;
  }
  return static_cast<double>(agree) / static_cast<double>(gold.size());
}

SftRecord select_sft_record(std::span<const CandidateTrace> candidates,
                            const Quadruple& quad, JudgeClient& judge) {
  validate(quad);
  if (candidates.empty())
    throw Error(Errc::all_candidates_failed,
                "no candidates to select from for " + quadruple_key(quad));

  // One verifier call per quadruple; the first candidate serves as the
  // verifier's reference reasoning.
  std::vector<PrincipleVerdict> gold;
  try {
    gold = judge.verify(quad, candidates[0].trace);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(Errc::judge_unavailable,
                std::string("verify failed: ") + e.what());
  }
  if (gold.size() != quad.principles.size())
    throw Error(Errc::length_mismatch,
                "verifier returned " + std::to_string(gold.size()) +
                    " verdicts for " + std::to_string(quad.principles.size()) +
                    " principles");

  std::size_t best = 0;
  double best_accuracy = -1.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    double accuracy = verification_accuracy(candidates[i].trace, gold);
    bool better = accuracy > best_accuracy;
    if (!better && accuracy == best_accuracy) {
      better = candidates[i].trace.length() < candidates[best].trace.length();
    }
    if (better) {
      best = i;
      best_accuracy = accuracy;
    }
  }

  SftRecord record;
  record.quadruple = quad;
  record.trace = candidates[best].trace;
  record.verification_accuracy = best_accuracy;
  record.provenance = candidates[best].provenance;
  return record;
}

std::vector<EditContext> curate_split(std::span<const EditContext> samples,
                                      CurateMode mode,
                                      const CurateOptions& options,
                                      HardCaseFilter* filter) {
  if (mode == CurateMode::Hard) {
    if (!filter)
      throw Error(Errc::filter_unavailable,
                  "Hard curation needs a hard-case filter");
    std::vector<EditContext> out;
    for (const EditContext& ctx : samples)
      if (filter->is_complex(ctx)) out.push_back(ctx);
    return out;
  }

  if (!(options.ratio >= 0.0 && options.ratio <= 1.0))
    throw Error(Errc::invariant_violation, "ratio: must lie in [0,1]");
  const std::size_t n = samples.size();
  const auto keep = static_cast<std::size_t>(
      std::lround(options.ratio * static_cast<double>(n)));
  if (keep >= n) return {samples.begin(), samples.end()};
  if (keep == 0) return {};

  // Seeded partial Fisher-Yates over the index set, then restored to input
  // order.
  std::vector<std::size_t> indices(n);
  std::iota(indices.begin(), indices.end(), std::size_t{0});
  auto rng = make_rng(derive_seed(options.seed, {0xC0DE}));
  for (std::size_t i = 0; i < keep; ++i) {
    std::uniform_int_distribution<std::size_t> d(i, n - 1);
    std::swap(indices[i], indices[d(rng)]);
  }
  indices.resize(keep);
  std::sort(indices.begin(), indices.end());
  std::vector<EditContext> out;
  out.reserve(keep);
  for (std::size_t i : indices) out.push_back(samples[i]);
  return out;
}

RecordStore::RecordStore(std::string path) : path_(std::move(path)) {
  // Keys live in a sidecar file so resumption never has to re-parse records.
  std::filesystem::path keys_file(path_ + ".keys");
  std::error_code ec;
  if (!std::filesystem::exists(keys_file, ec)) return;
  std::string content = read_file(keys_file.string());
  std::size_t pos = 0;
  while (pos <= content.size()) {
    std::size_t nl = content.find('\n', pos);
    std::string key;
    if (nl == std::string::npos) {
      key = trim(std::string_view(content).substr(pos));
      pos = content.size() + 1;
    } else {
      key = trim(std::string_view(content).substr(pos, nl - pos));
      pos = nl + 1;
    }
    if (!key.empty()) keys_.insert(key);
  }
}

bool RecordStore::append_once(const std::string& key, std::string_view line) {
  std::lock_guard lock(mutex_);
  if (keys_.count(key)) return false;
  append_jsonl_line(path_, line);
  append_jsonl_line(path_ + ".keys", key);
  keys_.insert(key);
  return true;
}

bool RecordStore::contains(const std::string& key) const {
  std::lock_guard lock(mutex_);
  return keys_.count(key) > 0;
}

std::size_t RecordStore::size() const {
  std::lock_guard lock(mutex_);
  return keys_.size();
}

std::string RecordStore::candidate_key(const Quadruple& quad,
                                       const std::string& scorer_id,
                                       const SamplingParams& params) {
  std::string material = quadruple_key(quad) + "\x1f" + scorer_id + "\x1f" +
                         format_double(params.temperature) + "\x1f" +
                         params.prompt_key + "\x1f" + std::to_string(params.seed);
  return "cand" + to_hex(fnv1a64(material));
}

namespace {

std::string encode_candidate_line(const Quadruple& quad,
                                  const CandidateTrace& candidate) {
  json j{{"v", 1},
         {"quadruple", json::parse(encode(quad))},
         {"trace", json::parse(encode(candidate.trace))},
         {"provenance",
          json{{"scorer_id", candidate.provenance.scorer_id},
               {"sampling_params",
                json{{"temperature",
                      candidate.provenance.sampling_params.temperature},
                     {"prompt_key",
                      candidate.provenance.sampling_params.prompt_key},
                     {"seed", candidate.provenance.sampling_params.seed}}}}}};
  return j.dump();
}

struct CandidateLine {
  Quadruple quadruple;
  CandidateTrace candidate;
};

CandidateLine decode_candidate_line(std::string_view line) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object() || j.value("v", 0) != 1)
    throw Error(Errc::parse_error, "bad candidate line");
  CandidateLine out;
  try {
    out.quadruple = decode_quadruple(j.at("quadruple").dump());
    out.candidate.trace = decode_reasoning_trace(j.at("trace").dump());
    const json& prov = j.at("provenance");
    out.candidate.provenance.scorer_id = prov.at("scorer_id").get<std::string>();
    const json& sp = prov.at("sampling_params");
    out.candidate.provenance.sampling_params.temperature =
        sp.at("temperature").get<double>();
    out.candidate.provenance.sampling_params.prompt_key =
        sp.at("prompt_key").get<std::string>();
    out.candidate.provenance.sampling_params.seed =
        sp.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, std::string("candidate line: ") + e.what());
  }
  return out;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::vector<std::string> lines;
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return lines;
  std::string content = read_file(path);
  std::size_t pos = 0;
  while (pos <= content.size()) {
    std::size_t nl = content.find('\n', pos);
    std::string line;
    if (nl == std::string::npos) {
      line = content.substr(pos);
      pos = content.size() + 1;
    } else {
      line = content.substr(pos, nl - pos);
      pos = nl + 1;
    }
    if (!trim(line).empty()) lines.push_back(std::move(line));
  }
  return lines;
}

}  // namespace

PipelineReport run_pipeline(std::span<const ContextRecord> records,
                            const std::string& step, JudgeClient& judge,
                            std::span<ScorerClient* const> scorers,
                            const std::string& out_dir,
                            const PipelineOptions& options) {
  const bool do_decompose = step == "decompose" || step == "all";
  const bool do_score = step == "score" || step == "all";
  const bool do_select = step == "verify" || step == "select" || step == "all";
  if (!do_decompose && !do_score && !do_select)
    throw Error(Errc::config_parse, "unknown pipeline step: " + step);
  if (records.empty()) throw Error(Errc::empty_batch, "no context records");

  std::filesystem::create_directories(out_dir);
  const std::string principles_path = out_dir + "/principles.jsonl";
  const std::string candidates_path = out_dir + "/candidates.jsonl";
  const std::string sft_path = out_dir + "/sft.jsonl";

  PipelineReport report;
  report.contexts = static_cast<int>(records.size());

  // Principle sets: from the input records, from a previous decompose run on
  // disk, or freshly decomposed.
  std::map<std::string, PrincipleSet> principles;
  for (const std::string& line : read_lines(principles_path)) {
    PrincipleSet set = decode_principle_set(line);
    principles[set.context_id] = std::move(set);
  }
  for (const ContextRecord& record : records) {
    if (record.principles)
      principles[context_key(record.context)] = *record.principles;
  }

  if (do_decompose) {
    RecordStore store(principles_path);
    std::mutex principles_mutex;
    std::atomic<int> decomposed{0};
    parallel_for(records.size(), options.parallelism, [&](std::size_t i) {
      const EditContext& ctx = records[i].context;
      const std::string key = context_key(ctx);
      {
        std::lock_guard lock(principles_mutex);
        if (principles.count(key)) return;
      }
      PrincipleSet set = decompose_principles(ctx, judge);
      if (store.append_once(key, encode(set))) decomposed.fetch_add(1);
      std::lock_guard lock(principles_mutex);
      principles[key] = std::move(set);
    });
    report.decomposed = decomposed.load();
  }

  auto principles_for = [&](const EditContext& ctx) -> const PrincipleSet& {
    auto it = principles.find(context_key(ctx));
    if (it == principles.end())
      throw Error(Errc::empty_decomposition,
                  "no principles for context; run the decompose step first: " +
                      ctx.instruction);
    return it->second;
  };

  // Candidate traces grouped per quadruple, for the selection pass.
  std::map<std::string, std::pair<Quadruple, std::vector<CandidateTrace>>>
      by_quadruple;
  for (const std::string& line : read_lines(candidates_path)) {
    CandidateLine parsed = decode_candidate_line(line);
    auto& slot = by_quadruple[quadruple_key(parsed.quadruple)];
    slot.first = parsed.quadruple;
    slot.second.push_back(std::move(parsed.candidate));
  }

  if (do_score) {
    if (scorers.empty()) throw Error(Errc::empty_batch, "scorer pool is empty");
    RecordStore store(candidates_path);
    std::vector<std::pair<const ContextRecord*, std::string>> jobs;
    for (const ContextRecord& record : records)
      for (const std::string& candidate : record.candidates)
        jobs.emplace_back(&record, candidate);
    report.quadruples = static_cast<int>(jobs.size());

    std::mutex result_mutex;
    // Parallelism fans out across quadruples here and the scorer pool runs
    // sequentially inside each job, keeping one job per (quad) slot.
    parallel_for(jobs.size(), options.parallelism, [&](std::size_t i) {
      const ContextRecord& record = *jobs[i].first;
      Quadruple quad{jobs[i].second, record.context,
                     principles_for(record.context)};
      bool all_present = true;
      for (ScorerClient* scorer : scorers) {
        for (const SamplingParams& params : options.variants) {
          if (!store.contains(
                  RecordStore::candidate_key(quad, scorer->id(), params))) {
            all_present = false;
            break;
          }
        }
        if (!all_present) break;
      }
      if (all_present) return;  // fully resumed from a previous run

      CandidateBatch batch = sample_candidates(quad, scorers, options.variants,
                                               /*parallelism=*/1);
      std::lock_guard lock(result_mutex);
      report.parse_failures += batch.failed;
      for (CandidateTrace& candidate : batch.parsed) {
        const std::string key = RecordStore::candidate_key(
            quad, candidate.provenance.scorer_id,
            candidate.provenance.sampling_params);
        if (store.append_once(key, encode_candidate_line(quad, candidate)))
          ++report.candidates;
        auto& slot = by_quadruple[quadruple_key(quad)];
        slot.first = quad;
        slot.second.push_back(std::move(candidate));
      }
    });
  }

  if (do_select) {
    if (by_quadruple.empty())
      throw Error(Errc::empty_batch,
                  "no candidates available; run the score step first");
    RecordStore store(sft_path);
    std::vector<const std::pair<Quadruple, std::vector<CandidateTrace>>*> quads;
    for (const auto& [key, slot] : by_quadruple) quads.push_back(&slot);
    std::mutex select_mutex;
    parallel_for(quads.size(), options.parallelism, [&](std::size_t i) {
      const auto& [quad, candidates] = *quads[i];
      const std::string key = quadruple_key(quad);
      if (store.contains(key)) return;
      SftRecord record = select_sft_record(candidates, quad, judge);
      if (store.append_once(key, encode(record))) {
        std::lock_guard lock(select_mutex);
        ++report.selected;
      }
    });
  }

  return report;
}

}  // namespace prefforge
