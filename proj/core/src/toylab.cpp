#include "prefforge/toylab.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <set>

#include <json.hpp>

#include "prefforge/errors.hpp"
#include "prefforge/serialize.hpp"
#include "prefforge/util.hpp"

namespace prefforge {

namespace {

using nlohmann::json;

double to_unit(std::uint64_t u) {
  return static_cast<double>(u >> 11) * 0x1.0p-53;
}

const char* kVerbs[] = {"add",     "remove",  "move",   "change", "swap",
                        "rotate",  "recolor", "resize", "brighten", "blur"};
const char* kObjects[] = {"the lamp",      "the sky",     "the left wall",
                          "the cat",       "the background", "the car",
                          "the street sign", "the tree",  "the curtains",
                          "the floor"};
const char* kModifiers[] = {"to dusk",        "to a warm tone",
                            "slightly",       "to match the reference",
                            "to deep blue",   "a little",
                            "to marble",      "toward the center"};

template <std::size_t N>
const char* pick(const char* (&arr)[N], std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> d(0, N - 1);
  return arr[d(rng)];
}

std::string sample_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "s%04d", i);
  return buf;
}

// Per-principle gold threshold in (0,10); shared by the stub judge and the
// stub scorer so a noiseless scorer reproduces the gold verdicts exactly.
double stub_threshold(const SyntheticWorld& world, const std::string& ctx_key,
                      std::size_t k) {
  std::uint64_t u = mix64(fnv1a64(ctx_key) ^ mix64(world.seed ^ (1000 + k)));
  return 10.0 * (0.15 + 0.7 * to_unit(u));
}

double latent_of(const SyntheticWorld& world, const std::string& sample_id) {
  auto it = world.latent_quality.find(sample_id);
  if (it == world.latent_quality.end())
    throw Error(Errc::invariant_violation,
                "sample id not in this world: " + sample_id);
  return it->second;
}

std::vector<double> softmax_scaled(std::span<const double> logits,
                                   double temperature) {
  std::vector<double> p(logits.size());
  if (temperature == 0.0) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < logits.size(); ++i)
      if (logits[i] > logits[best]) best = i;
    p[best] = 1.0;
    return p;
  }
  double max_scaled = logits[0] / temperature;
  for (std::size_t i = 1; i < logits.size(); ++i)
    max_scaled = std::max(max_scaled, logits[i] / temperature);
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] / temperature - max_scaled);
    sum += p[i];
  }
  for (double& x : p) x /= sum;
  return p;
}

std::size_t sample_index(std::span<const double> probs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(0.0, 1.0);
  double u = d(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  return probs.size() - 1;
}

}  // namespace

SyntheticWorld make_world(const WorldParams& params) {
  if (params.samples < 2)
    throw Error(Errc::invariant_violation, "samples: need at least 2");
  if (params.candidates_per_context < 2)
    throw Error(Errc::invariant_violation,
                "candidates_per_context: need at least 2");
  if (!(params.noise_sigma >= 0.0))
    throw Error(Errc::invariant_violation, "noise_sigma: must be >= 0");
  if (!(params.same_margin >= 0.0))
    throw Error(Errc::invariant_violation, "same_margin: must be >= 0");

  SyntheticWorld world;
  world.noise_sigma = params.noise_sigma;
  world.same_margin = params.same_margin;
  world.seed = params.seed;

  auto latent_rng = make_rng(derive_seed(params.seed, {1}));
  std::uniform_real_distribution<double> quality(0.0, 10.0);
  for (int i = 0; i < params.samples; ++i)
    world.latent_quality[sample_name(i)] = quality(latent_rng);

  const int cpc = params.candidates_per_context;
  const int contexts = (params.samples + cpc - 1) / cpc;
  for (int c = 0; c < contexts; ++c) {
    auto rng = make_rng(derive_seed(params.seed, {2, static_cast<std::uint64_t>(c)}));
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    ContextRecord record;
    char ref[16];
    std::snprintf(ref, sizeof(ref), "r%04d", c);
    record.context.reference_sample = ref;
    if (coin(rng) < 0.4) {
      // Multi-step edit: two verbs, flagged complex by the verb-count filter.
      record.context.instruction = std::string(pick(kVerbs, rng)) + " " +
                                   pick(kObjects, rng) + " " +
                                   pick(kModifiers, rng) + " and then " +
                                   pick(kVerbs, rng) + " " + pick(kObjects, rng);
    } else {
      record.context.instruction = std::string(pick(kVerbs, rng)) + " " +
                                   pick(kObjects, rng) + " " +
                                   pick(kModifiers, rng);
    }
    for (int i = c * cpc; i < std::min((c + 1) * cpc, params.samples); ++i)
      record.candidates.push_back(sample_name(i));
    world.contexts.push_back(std::move(record));
  }
  return world;
}

PreferenceLabel world_label(const SyntheticWorld& world, const std::string& left,
                            const std::string& right) {
  double diff = latent_of(world, left) - latent_of(world, right);
  if (std::abs(diff) < world.same_margin) return PreferenceLabel::Same;
  return diff > 0.0 ? PreferenceLabel::WinnerLeft : PreferenceLabel::WinnerRight;
}

std::vector<PreferencePair> make_pairs(const SyntheticWorld& world, int count,
                                       std::uint64_t seed) {
  if (count < 1) throw Error(Errc::invariant_violation, "count: must be >= 1");
  std::vector<const ContextRecord*> eligible;
  for (const auto& record : world.contexts)
    if (record.candidates.size() >= 2) eligible.push_back(&record);
  if (eligible.empty())
    throw Error(Errc::empty_group, "world has no context with two candidates");

  StubJudge judge(world);
  std::map<std::string, PrincipleSet> principle_cache;
  auto principles_for = [&](const EditContext& ctx) {
    auto [it, inserted] = principle_cache.try_emplace(context_key(ctx));
    if (inserted) it->second = judge.decompose(ctx);
    return it->second;
  };

  auto rng = make_rng(derive_seed(seed, {3}));
  std::vector<PreferencePair> out;
  out.reserve(static_cast<std::size_t>(count));
  std::uniform_int_distribution<std::size_t> pick_ctx(0, eligible.size() - 1);
  for (int i = 0; i < count; ++i) {
    const ContextRecord& record = *eligible[pick_ctx(rng)];
    std::uniform_int_distribution<std::size_t> pick_cand(
        0, record.candidates.size() - 1);
    std::size_t a = pick_cand(rng);
    std::size_t b = pick_cand(rng);
    while (b == a) b = pick_cand(rng);
    PreferencePair pair;
    pair.context = record.context;
    PrincipleSet principles = principles_for(record.context);
    pair.winner = Quadruple{record.candidates[a], record.context, principles};
    pair.loser = Quadruple{record.candidates[b], record.context, principles};
    pair.label = world_label(world, record.candidates[a], record.candidates[b]);
    out.push_back(std::move(pair));
  }
  return out;
}

std::string encode_world(const SyntheticWorld& world) {
  json latents = json::object();
  for (const auto& [id, q] : world.latent_quality) latents[id] = q;
  json contexts = json::array();
  for (const auto& record : world.contexts)
    contexts.push_back(json::parse(encode(record)));
  json j{{"v", 1},
         {"noise_sigma", world.noise_sigma},
         {"same_margin", world.same_margin},
         {"seed", world.seed},
         {"latent_quality", latents},
         {"contexts", contexts}};
  return j.dump();
}

SyntheticWorld decode_world(std::string_view text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw Error(Errc::parse_error, "world file is not a JSON object");
  if (j.value("v", 0) != 1)
    throw Error(Errc::parse_error, "unsupported world schema version");
  SyntheticWorld world;
  try {
    world.noise_sigma = j.at("noise_sigma").get<double>();
    world.same_margin = j.at("same_margin").get<double>();
    world.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& [id, q] : j.at("latent_quality").items())
      world.latent_quality[id] = q.get<double>();
    for (const auto& e : j.at("contexts"))
      world.contexts.push_back(decode_context_record(e.dump()));
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, std::string("world: ") + e.what());
  }
  return world;
}

ScoreFn oracle_score_fn(const SyntheticWorld& world) {
  auto latents = world.latent_quality;
  return [latents](const Quadruple& quad) {
    auto it = latents.find(quad.edited_sample);
    if (it == latents.end())
      throw Error(Errc::invariant_violation,
                  "sample id not in this world: " + quad.edited_sample);
    return it->second;
  };
}

FeatureFn world_feature_fn(const SyntheticWorld& world) {
  auto latents = world.latent_quality;
  std::uint64_t seed = world.seed;
  return [latents, seed](const std::string& sample_id) {
    auto it = latents.find(sample_id);
    if (it == latents.end())
      throw Error(Errc::invariant_violation,
                  "sample id not in this world: " + sample_id);
    std::vector<double> f(kWorldFeatureDim);
    f[0] = it->second / 10.0 - 0.5;
    // Distractors: deterministic per-sample hash coordinates carrying no
    // quality signal.
    for (int k = 1; k <= 3; ++k) {
      std::uint64_t u =
          mix64(fnv1a64(sample_id) ^ mix64(seed ^ (0xD15 + static_cast<std::uint64_t>(k))));
      f[static_cast<std::size_t>(k)] = to_unit(u) - 0.5;
    }
    f[4] = 1.0;
    return f;
  };
}

ToyScoringPolicy::ToyScoringPolicy(FeatureFn features, int feature_dim,
                                   ToyPolicyOptions options)
    : features_(std::move(features)),
      feature_dim_(feature_dim),
      options_(options) {
  if (!features_)
    throw Error(Errc::invariant_violation, "features: must be set");
  if (feature_dim_ < 1)
    throw Error(Errc::invariant_violation, "feature_dim: must be >= 1");
  if (!(options_.temperature >= 0.0))
    throw Error(Errc::invariant_violation, "temperature: must be >= 0");
  if (options_.think_min < 1 || options_.think_max < options_.think_min)
    throw Error(Errc::invariant_violation,
                "think_min/think_max: need 1 <= min <= max");
  weights_.resize(static_cast<std::size_t>(kScoreLevels) *
                  static_cast<std::size_t>(feature_dim_));
  auto rng = make_rng(options_.init_seed);
  std::normal_distribution<double> init(0.0, options_.init_scale);
  for (double& w : weights_) w = options_.init_scale == 0.0 ? 0.0 : init(rng);
}

std::size_t ToyScoringPolicy::param_count() const { return weights_.size(); }

std::vector<double> ToyScoringPolicy::params() const { return weights_; }

void ToyScoringPolicy::set_params(std::span<const double> values) {
  if (values.size() != weights_.size())
    throw Error(Errc::shape_mismatch, "parameter vector has wrong size");
  for (double v : values)
    if (!std::isfinite(v))
      throw Error(Errc::non_finite_score, "parameter is not finite");
  weights_.assign(values.begin(), values.end());
}

std::vector<double> ToyScoringPolicy::score_logits(
    const Quadruple& quad, std::span<const double> params) const {
  std::vector<double> f = features_(quad.edited_sample);
  if (f.size() != static_cast<std::size_t>(feature_dim_))
    throw Error(Errc::shape_mismatch, "feature function returned wrong size");
  std::vector<double> logits(kScoreLevels, 0.0);
  for (int v = 0; v < kScoreLevels; ++v) {
    double acc = 0.0;
    for (int d = 0; d < feature_dim_; ++d)
      acc += params[static_cast<std::size_t>(v) * feature_dim_ + d] * f[d];
    logits[static_cast<std::size_t>(v)] = acc;
  }
  return logits;
}

ReasoningTrace ToyScoringPolicy::sample_trace(const Quadruple& quad,
                                              std::uint64_t seed) const {
  validate(quad);
  auto rng = make_rng(seed);
  std::uniform_int_distribution<int> think_len(options_.think_min,
                                               options_.think_max);
  // Greedy decoding must be fully deterministic, skeleton included.
  int len = options_.temperature == 0.0 ? options_.think_min : think_len(rng);
  std::vector<double> probs =
      softmax_scaled(score_logits(quad, weights_), options_.temperature);
  int v = static_cast<int>(sample_index(probs, rng));
  double logp = std::min(std::log(probs[static_cast<std::size_t>(v)]), 0.0);

  ReasoningTrace trace;
  trace.think_text = "checked " + quad.edited_sample + " against " +
                     std::to_string(quad.principles.size()) + " criteria";
  const std::size_t k = quad.principles.size();
  const auto met_count = static_cast<std::size_t>(
      std::lround(static_cast<double>(k) * v / 10.0));
  double met_sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    PrincipleVerdict verdict;
    verdict.principle_id = quad.principles.principles[i].id;
    verdict.met = i < met_count ? 1 : 0;
    met_sum += verdict.met;
    trace.verdicts.push_back(std::move(verdict));
  }
  trace.average_score = met_sum / static_cast<double>(k);
  trace.final_score = static_cast<double>(v);
  for (int t = 0; t < len; ++t) {
    trace.token_ids.push_back(kFillerToken);
    trace.token_logprobs_current.push_back(0.0);
    trace.token_logprobs_old.push_back(0.0);
  }
  trace.token_ids.push_back(v);
  trace.token_logprobs_current.push_back(logp);
  trace.token_logprobs_old.push_back(logp);
  return trace;
}

std::vector<double> ToyScoringPolicy::token_logprobs(
    const Quadruple& quad, const ReasoningTrace& trace,
    std::span<const double> params) const {
  if (params.size() != weights_.size())
    throw Error(Errc::shape_mismatch, "parameter vector has wrong size");
  std::vector<double> out;
  out.reserve(trace.token_ids.size());
  std::vector<double> probs;
  for (int token : trace.token_ids) {
    if (token == kFillerToken) {
      out.push_back(0.0);
      continue;
    }
    if (token < 0 || token >= kScoreLevels)
      throw Error(Errc::shape_mismatch,
                  "token id out of vocabulary: " + std::to_string(token));
    if (probs.empty())
      probs = softmax_scaled(score_logits(quad, params), options_.temperature);
    out.push_back(std::min(
        std::log(probs[static_cast<std::size_t>(token)]), 0.0));
  }
  return out;
}

std::vector<double> ToyScoringPolicy::weighted_logprob_grad(
    const Quadruple& quad, const ReasoningTrace& trace,
    std::span<const double> weights, std::span<const double> params) const {
  if (params.size() != weights_.size())
    throw Error(Errc::shape_mismatch, "parameter vector has wrong size");
  if (weights.size() != trace.token_ids.size())
    throw Error(Errc::shape_mismatch, "weights must cover every token");
  std::vector<double> grad(weights_.size(), 0.0);
  if (options_.temperature == 0.0) return grad;  // greedy: gradient is zero a.e.
  std::vector<double> f = features_(quad.edited_sample);
  std::vector<double> probs;
  for (std::size_t t = 0; t < trace.token_ids.size(); ++t) {
    int token = trace.token_ids[t];
    if (token == kFillerToken || weights[t] == 0.0) continue;
    if (probs.empty())
      probs = softmax_scaled(score_logits(quad, params), options_.temperature);
    // d logp(v) / d W[u][d] = (1/tau) * ([u == v] - p_u) * f_d
    const double scale = weights[t] / options_.temperature;
    for (int u = 0; u < kScoreLevels; ++u) {
      double coeff =
          scale * ((u == token ? 1.0 : 0.0) - probs[static_cast<std::size_t>(u)]);
      for (int d = 0; d < feature_dim_; ++d)
        grad[static_cast<std::size_t>(u) * feature_dim_ + d] += coeff * f[d];
    }
  }
  return grad;
}

std::vector<double> ToyScoringPolicy::score_distribution(
    const Quadruple& quad) const {
  return softmax_scaled(score_logits(quad, weights_), options_.temperature);
}

double ToyScoringPolicy::expected_score(const Quadruple& quad) const {
  std::vector<double> probs = score_distribution(quad);
  double acc = 0.0;
  for (int v = 0; v < kScoreLevels; ++v)
    acc += v * probs[static_cast<std::size_t>(v)];
  return acc;
}

std::vector<double> ToyScoringPolicy::position_distribution(
    const Quadruple& quad, const ReasoningTrace& trace, std::size_t t) const {
  if (t >= trace.token_ids.size())
    throw Error(Errc::shape_mismatch, "position beyond trace length");
  std::vector<double> out(kVocabSize, 0.0);
  if (trace.token_ids[t] == kFillerToken) {
    out[kFillerToken] = 1.0;
    return out;
  }
  std::vector<double> probs = score_distribution(quad);
  for (int v = 0; v < kScoreLevels; ++v)
    out[static_cast<std::size_t>(v)] = probs[static_cast<std::size_t>(v)];
  return out;
}

std::vector<ReasoningTrace> toy_rollout(const ToyScoringPolicy& policy,
                                        const Quadruple& quad, int n,
                                        std::uint64_t seed) {
  if (n < 1) throw Error(Errc::invariant_violation, "n: must be >= 1");
  std::vector<ReasoningTrace> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j)
    out.push_back(policy.sample_trace(
        quad, derive_seed(seed, {static_cast<std::uint64_t>(j)})));
  return out;
}

ToyTokenPolicy::ToyTokenPolicy(int vocab_size, ToyTokenOptions options)
    : vocab_size_(vocab_size), options_(options) {
  if (vocab_size_ < 2)
    throw Error(Errc::invariant_violation, "vocab_size: must be >= 2");
  if (!(options_.temperature >= 0.0))
    throw Error(Errc::invariant_violation, "temperature: must be >= 0");
  if (options_.sequence_length < 1)
    throw Error(Errc::invariant_violation, "sequence_length: must be >= 1");
  logits_.resize(static_cast<std::size_t>(vocab_size_), 0.0);
  if (options_.init_scale != 0.0) {
    auto rng = make_rng(options_.init_seed);
    std::normal_distribution<double> init(0.0, options_.init_scale);
    for (double& x : logits_) x = init(rng);
  }
}

ToyTokenPolicy ToyTokenPolicy::for_candidates(
    std::span<const ContextRecord> contexts, ToyTokenOptions options) {
  if (contexts.empty())
    throw Error(Errc::empty_batch, "no contexts for the candidate policy");
  std::size_t vocab = 0;
  for (const auto& record : contexts) {
    if (record.candidates.empty())
      throw Error(Errc::empty_group,
                  "context has no candidates: " + record.context.instruction);
    vocab = std::max(vocab, record.candidates.size());
  }
  ToyTokenPolicy policy(static_cast<int>(std::max<std::size_t>(vocab, 2)),
                        options);
  policy.rows_ = static_cast<int>(contexts.size());
  policy.logits_.assign(
      static_cast<std::size_t>(policy.rows_) * policy.vocab_size_, 0.0);
  if (options.init_scale != 0.0) {
    auto rng = make_rng(options.init_seed);
    std::normal_distribution<double> init(0.0, options.init_scale);
    for (double& x : policy.logits_) x = init(rng);
  }
  for (std::size_t r = 0; r < contexts.size(); ++r) {
    policy.context_rows_[context_key(contexts[r].context)] = static_cast<int>(r);
    policy.candidate_ids_.push_back(contexts[r].candidates);
  }
  return policy;
}

std::size_t ToyTokenPolicy::param_count() const { return logits_.size(); }

std::vector<double> ToyTokenPolicy::params() const { return logits_; }

void ToyTokenPolicy::set_params(std::span<const double> values) {
  if (values.size() != logits_.size())
    throw Error(Errc::shape_mismatch, "parameter vector has wrong size");
  for (double v : values)
    if (!std::isfinite(v))
      throw Error(Errc::non_finite_score, "parameter is not finite");
  logits_.assign(values.begin(), values.end());
}

int ToyTokenPolicy::row_of(const EditContext& ctx) const {
  if (context_rows_.empty()) return 0;
  auto it = context_rows_.find(context_key(ctx));
  if (it == context_rows_.end())
    throw Error(Errc::invariant_violation,
                "context not known to this policy: " + ctx.instruction);
  return it->second;
}

std::vector<double> ToyTokenPolicy::row_distribution(
    int row, std::span<const double> params) const {
  std::span<const double> slice =
      params.subspan(static_cast<std::size_t>(row) * vocab_size_,
                     static_cast<std::size_t>(vocab_size_));
  return softmax_scaled(slice, options_.temperature);
}

GeneratedSample ToyTokenPolicy::generate(const EditContext& ctx,
                                         std::uint64_t seed) const {
  const int row = row_of(ctx);
  auto rng = make_rng(seed);
  std::vector<double> probs = row_distribution(row, logits_);
  GeneratedSample sample;
  sample.tokens.reserve(static_cast<std::size_t>(options_.sequence_length));
  for (int t = 0; t < options_.sequence_length; ++t)
    sample.tokens.push_back(static_cast<int>(sample_index(probs, rng)));
  if (static_cast<std::size_t>(row) < candidate_ids_.size() &&
      !candidate_ids_[static_cast<std::size_t>(row)].empty()) {
    const auto& ids = candidate_ids_[static_cast<std::size_t>(row)];
    sample.sample_id =
        ids[static_cast<std::size_t>(sample.tokens[0]) % ids.size()];
  } else {
    sample.sample_id = "tok";
    for (int token : sample.tokens)
      sample.sample_id += ":" + std::to_string(token);
  }
  return sample;
}

std::vector<double> ToyTokenPolicy::step_logprobs(
    const EditContext& ctx, const GeneratedSample& sample,
    std::span<const double> params) const {
  if (params.size() != logits_.size())
    throw Error(Errc::shape_mismatch, "parameter vector has wrong size");
  const int row = row_of(ctx);
  std::vector<double> probs = row_distribution(row, params);
  std::vector<double> out;
  out.reserve(sample.tokens.size());
  for (int token : sample.tokens) {
    if (token < 0 || token >= vocab_size_)
      throw Error(Errc::shape_mismatch,
                  "token id out of vocabulary: " + std::to_string(token));
    out.push_back(std::min(
        std::log(probs[static_cast<std::size_t>(token)]), 0.0));
  }
  return out;
}

std::vector<double> ToyTokenPolicy::weighted_logprob_grad(
    const EditContext& ctx, const GeneratedSample& sample,
    std::span<const double> weights, std::span<const double> params) const {
  if (params.size() != logits_.size())
    throw Error(Errc::shape_mismatch, "parameter vector has wrong size");
  if (weights.size() != sample.tokens.size())
    throw Error(Errc::shape_mismatch, "weights must cover every step");
  std::vector<double> grad(logits_.size(), 0.0);
  if (options_.temperature == 0.0) return grad;
  const int row = row_of(ctx);
  std::vector<double> probs = row_distribution(row, params);
  const std::size_t base = static_cast<std::size_t>(row) * vocab_size_;
  for (std::size_t t = 0; t < sample.tokens.size(); ++t) {
    if (weights[t] == 0.0) continue;
    const int token = sample.tokens[t];
    const double scale = weights[t] / options_.temperature;
    for (int u = 0; u < vocab_size_; ++u)
      grad[base + static_cast<std::size_t>(u)] +=
          scale * ((u == token ? 1.0 : 0.0) - probs[static_cast<std::size_t>(u)]);
  }
  return grad;
}

double ToyTokenPolicy::token_probability(const EditContext& ctx,
                                         int token) const {
  if (token < 0 || token >= vocab_size_)
    throw Error(Errc::shape_mismatch,
                "token id out of vocabulary: " + std::to_string(token));
  return row_distribution(row_of(ctx), logits_)[static_cast<std::size_t>(token)];
}

WinLossRatios brute_force_ratios(std::span<const double> winner_scores,
                                 std::span<const double> loser_scores,
                                 double tie_delta) {
  if (winner_scores.empty() || loser_scores.empty())
    throw Error(Errc::group_size_mismatch, "score groups must be nonempty");
  if (winner_scores.size() != loser_scores.size())
    throw Error(Errc::group_size_mismatch,
                "groups must have the same size");
  for (double s : winner_scores)
    if (!std::isfinite(s))
      throw Error(Errc::non_finite_score, "winner score is not finite");
  for (double s : loser_scores)
    if (!std::isfinite(s))
      throw Error(Errc::non_finite_score, "loser score is not finite");
  const std::size_t n = winner_scores.size();
  const double inv = 1.0 / static_cast<double>(n);
  WinLossRatios out;
  out.win.assign(n, 0.0);
  out.loss.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    std::size_t wins = 0;
    for (std::size_t k = 0; k < n; ++k)
      if (winner_scores[j] - loser_scores[k] > tie_delta) ++wins;
    out.win[j] = inv * static_cast<double>(wins);
  }
  for (std::size_t j = 0; j < n; ++j) {
    std::size_t defeats = 0;
    for (std::size_t k = 0; k < n; ++k)
      if (winner_scores[k] - loser_scores[j] > tie_delta) ++defeats;
    out.loss[j] = inv * static_cast<double>(defeats);
  }
  return out;
}

std::vector<double> finite_difference_grad(
    const std::function<double(std::span<const double>)>& objective,
    std::span<const double> theta, double h) {
  if (!(h > 0.0))
    throw Error(Errc::invariant_violation, "h: must be > 0");
  std::vector<double> point(theta.begin(), theta.end());
  std::vector<double> grad(point.size(), 0.0);
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double saved = point[i];
    point[i] = saved + h;
    double plus = objective(point);
    point[i] = saved - h;
    double minus = objective(point);
    point[i] = saved;
    grad[i] = (plus - minus) / (2.0 * h);
  }
  return grad;
}

PrincipleSet StubJudge::decompose(const EditContext& ctx) {
  validate(ctx);
  const std::string key = context_key(ctx);
  const std::uint64_t h = mix64(fnv1a64(key) ^ mix64(world_.seed));
  int follow = 3 + static_cast<int>(mix64(h ^ 1) % 2);
  int keep = 3 + static_cast<int>(mix64(h ^ 2) % 2);
  int quality = 10 - follow - keep;
  if (quality > 3) {  // keep the quality share at 2-3 of the 10 checks
    follow += 1;
    quality -= 1;
  }

  PrincipleSet set;
  set.context_id = key;
  int index = 0;
  auto push = [&](PrincipleCategory category, const std::string& text) {
    Principle p;
    char id[16];
    std::snprintf(id, sizeof(id), "p%02d", ++index);
    p.id = id;
    p.text = text;
    p.category = category;
    set.principles.push_back(std::move(p));
  };
  for (int i = 1; i <= follow; ++i)
    push(PrincipleCategory::Follow,
         "Does the edit carry out part " + std::to_string(i) + " of '" +
             ctx.instruction + "'?");
  for (int i = 1; i <= keep; ++i)
    push(PrincipleCategory::Keep,
         "Is unrelated region " + std::to_string(i) +
             " unchanged from the reference?");
  for (int i = 1; i <= quality; ++i)
    push(PrincipleCategory::Quality,
         "Is the result free of artifact type " + std::to_string(i) + "?");
  return set;
}

std::vector<PrincipleVerdict> StubJudge::verify(const Quadruple& quad,
                                                const ReasoningTrace& reference) {
  (void)reference;  // the stand-in knows the latent truth directly
  validate(quad);
  const double q = latent_of(world_, quad.edited_sample);
  const std::string key = context_key(quad.context);
  std::vector<PrincipleVerdict> out;
  out.reserve(quad.principles.size());
  for (std::size_t k = 0; k < quad.principles.size(); ++k) {
    const double threshold = stub_threshold(world_, key, k);
    PrincipleVerdict v;
    v.principle_id = quad.principles.principles[k].id;
    v.met = q >= threshold ? 1 : 0;
    v.reason = "quality " + format_double(q) + (v.met ? " clears " : " misses ") +
               format_double(threshold);
    out.push_back(std::move(v));
  }
  return out;
}

RawTraceText StubScorer::score(const Quadruple& quad,
                               const SamplingParams& params) {
  validate(quad);
  const double q = latent_of(world_, quad.edited_sample);
  const double sigma = world_.noise_sigma + 0.35 * params.temperature;
  auto rng = make_rng(derive_seed(
      seed_, {fnv1a64(quadruple_key(quad)), fnv1a64(id_), params.seed,
              std::bit_cast<std::uint64_t>(params.temperature)}));
  double observed = q;
  if (sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, sigma);
    observed += noise(rng);
  }

  const std::string key = context_key(quad.context);
  ReasoningTrace trace;
  trace.think_text = "compared " + quad.edited_sample +
                     " with the reference and walked the checklist";
  double met_sum = 0.0;
  for (std::size_t k = 0; k < quad.principles.size(); ++k) {
    PrincipleVerdict v;
    v.principle_id = quad.principles.principles[k].id;
    v.met = observed >= stub_threshold(world_, key, k) ? 1 : 0;
    met_sum += v.met;
    trace.verdicts.push_back(std::move(v));
  }
  trace.average_score =
      met_sum / static_cast<double>(quad.principles.size());
  trace.final_score = std::clamp(observed, 0.0, 10.0);
  return emit_trace(trace, quad.principles);
}

bool VerbCountFilter::is_complex(const EditContext& ctx) {
  static const std::set<std::string> verbs(std::begin(kVerbs), std::end(kVerbs));
  std::string normalized = normalize_text(ctx.instruction);
  int count = 0;
  std::size_t pos = 0;
  while (pos < normalized.size()) {
    std::size_t space = normalized.find(' ', pos);
    std::string word = normalized.substr(
        pos, space == std::string::npos ? std::string::npos : space - pos);
    if (verbs.count(word)) ++count;
    if (space == std::string::npos) break;
    pos = space + 1;
  }
  return count >= 2;
}

void save_policy_checkpoint(const std::string& path,
                            const ToyScoringPolicy& policy,
                            const SyntheticWorld& world) {
  json j{{"v", 1},
         {"kind", "toy-scoring"},
         {"feature_dim", policy.feature_dim()},
         {"params", policy.params()},
         {"options",
          json{{"temperature", policy.options().temperature},
               {"think_min", policy.options().think_min},
               {"think_max", policy.options().think_max},
               {"init_seed", policy.options().init_seed},
               {"init_scale", policy.options().init_scale}}},
         {"world", json::parse(encode_world(world))}};
  write_file(path, j.dump());
}

LoadedPolicy load_policy_checkpoint(const std::string& path) {
  json j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw Error(Errc::parse_error, "checkpoint is not a JSON object: " + path);
  if (j.value("v", 0) != 1 || j.value("kind", "") != "toy-scoring")
    throw Error(Errc::parse_error,
                "unsupported checkpoint schema in " + path);
  LoadedPolicy out;
  try {
    out.world = decode_world(j.at("world").dump());
    ToyPolicyOptions options;
    const json& o = j.at("options");
    options.temperature = o.at("temperature").get<double>();
    options.think_min = o.at("think_min").get<int>();
    options.think_max = o.at("think_max").get<int>();
    options.init_seed = o.at("init_seed").get<std::uint64_t>();
    options.init_scale = o.at("init_scale").get<double>();
    const int feature_dim = j.at("feature_dim").get<int>();
    out.policy = std::make_unique<ToyScoringPolicy>(
        world_feature_fn(out.world), feature_dim, options);
    std::vector<double> params = j.at("params").get<std::vector<double>>();
    out.policy->set_params(params);
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, std::string("checkpoint: ") + e.what());
  }
  return out;
}

}  // namespace prefforge
