#include "adafuse/engine.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <memory>
#include <mutex>
#include <set>
#include <stdexcept>

#include "adafuse/commit.hpp"
#include "adafuse/diversity.hpp"
#include "adafuse/errors.hpp"
#include "adafuse/segmenter.hpp"
#include "adafuse/text.hpp"
#include "parallel.hpp"

namespace adafuse {

std::string_view to_string(DecodeMode mode) {
  switch (mode) {
    case DecodeMode::adafuse: return "adafuse";
    case DecodeMode::fixed_length: return "fixed_length";
    case DecodeMode::beam_round: return "beam_round";
  }
  return "unknown";
}

DecodeMode parse_decode_mode(std::string_view name) {
  if (name == "adafuse") return DecodeMode::adafuse;
  if (name == "fixed_length" || name == "fixed") return DecodeMode::fixed_length;
  if (name == "beam_round" || name == "beam") return DecodeMode::beam_round;
  throw std::invalid_argument("unknown decode mode '" + std::string(name) + "'");
}

std::string_view to_string(MarginSource source) {
  return source == MarginSource::word_start ? "word_start" : "next_word";
}

MarginSource parse_margin_source(std::string_view name) {
  if (name == "word_start") return MarginSource::word_start;
  if (name == "next_word") return MarginSource::next_word;
  throw std::invalid_argument("unknown margin source '" + std::string(name) + "'");
}

std::string_view to_string(RoundTrigger trigger) {
  switch (trigger) {
    case RoundTrigger::confident: return "confident";
    case RoundTrigger::low_margin_halt: return "low_margin_halt";
    case RoundTrigger::diversified: return "diversified";
    case RoundTrigger::eos: return "eos";
    case RoundTrigger::fixed_length: return "fixed_length";
    case RoundTrigger::beam_round: return "beam_round";
  }
  return "unknown";
}

std::string_view to_string(StopReason reason) {
  switch (reason) {
    case StopReason::eos: return "eos";
    case StopReason::stop_sequence: return "stop_sequence";
    case StopReason::max_new_words: return "max_new_words";
    case StopReason::max_new_chars: return "max_new_chars";
    case StopReason::error: return "error";
  }
  return "unknown";
}

void DecodeConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("decode config: " + what); };
  if (!std::isfinite(tau_delta) || tau_delta < 0.0) fail("tau_delta must be finite and >= 0");
  if (max_words_per_round < 1) fail("max_words_per_round must be >= 1");
  if (branching_factor < 1) fail("branching_factor must be >= 1");
  if (max_word_tokens < 1) fail("max_word_tokens must be >= 1");
  if (max_new_words < 1) fail("max_new_words must be >= 1");
  if (max_new_chars < 1) fail("max_new_chars must be >= 1");
  if (topk_for_margin < 2) fail("topk_for_margin must be >= 2");
  if (jobs < 1) fail("jobs must be >= 1");
  if (mode == DecodeMode::fixed_length && (fixed_length < 1 || fixed_length > 3)) {
    fail("fixed_length must be 1, 2 or 3");
  }
  if (mode == DecodeMode::beam_round && beam_round_tokens < 1) fail("beam_round_tokens must be >= 1");
  for (const auto& s : stop_sequences) {
    if (s.empty()) fail("stop sequences must be non-empty");
  }
}

namespace {

// Counts provider traffic for the trace and serializes access to providers
// that declare themselves single-threaded.
class InstrumentedModel final : public LanguageModel {
 public:
  explicit InstrumentedModel(const LanguageModel& inner) : inner_(inner) {}

  const ModelInfo& info() const override { return inner_.info(); }

  TokenSequence encode(std::string_view text) const override {
    auto lock = guard();
    return inner_.encode(text);
  }
  std::string decode(std::span<const TokenId> tokens) const override {
    auto lock = guard();
    return inner_.decode(tokens);
  }
  TokenDistribution topk(std::span<const TokenId> context, std::size_t k) const override {
    ++topk_calls_;
    auto lock = guard();
    return inner_.topk(context, k);
  }
  std::vector<double> score_tokens(std::span<const TokenId> context,
                                   std::span<const TokenId> continuation) const override {
    ++score_calls_;
    auto lock = guard();
    return inner_.score_tokens(context, continuation);
  }

  std::size_t topk_calls() const { return topk_calls_; }
  std::size_t score_calls() const { return score_calls_; }

 private:
  std::unique_lock<std::mutex> guard() const {
    if (inner_.thread_safe()) return {};
    return std::unique_lock<std::mutex>(mutex_);
  }

  const LanguageModel& inner_;
  mutable std::mutex mutex_;
  mutable std::atomic<std::size_t> topk_calls_{0};
  mutable std::atomic<std::size_t> score_calls_{0};
};

std::size_t word_units(std::string_view word_text) { return text::has_content(word_text) ? 1 : 0; }

struct RoundContext {
  const LanguageModel& model;
  std::size_t model_index;
  const Prefix& prefix;
  const DecodeConfig& config;
  std::size_t word_budget;
};

SpanCandidate make_candidate(const RoundContext& ctx, std::string text, std::size_t words,
                             bool is_eos, std::optional<std::size_t> branch) {
  SpanCandidate c;
  c.span_text = std::move(text);
  c.word_count = words;
  c.is_eos = is_eos;
  c.origin.model_index = ctx.model_index;
  c.origin.model_id = ctx.model.info().model_id;
  c.origin.branch = branch;
  return c;
}

WordOptions word_options(const DecodeConfig& config) {
  WordOptions opts;
  opts.max_word_tokens = config.max_word_tokens;
  opts.topk = config.topk_for_margin;
  if (config.diversity_enabled) opts.topk = std::max(opts.topk, config.branching_factor);
  return opts;
}

ModelRound adaptive_round(const RoundContext& ctx) {
  const DecodeConfig& cfg = ctx.config;
  const WordOptions opts = word_options(cfg);
  GateConfig gate;
  gate.tau_delta = cfg.tau_delta;
  gate.max_words_per_round = std::min(cfg.max_words_per_round, ctx.word_budget);
  gate.diversity_enabled = cfg.diversity_enabled;

  ModelRound mr;
  mr.model_id = ctx.model.info().model_id;
  std::string round_text;
  std::size_t words = 0;
  mr.trigger = RoundTrigger::confident;

  while (words < gate.max_words_per_round) {
    WordProposal w = gen_word(ctx.model, ctx.prefix, round_text, std::nullopt, opts);
    double m = margin(w.first_token_dist, ctx.model.info().vocab_size);
    if (cfg.margin_source == MarginSource::next_word && w.terminal != WordTerminal::eos) {
      TokenSequence next_ctx = ctx.model.encode(ctx.prefix.text + round_text + w.word_text);
      check_context(ctx.model, next_ctx.size() + 1);
      m = margin(ctx.model.topk(next_ctx, std::max<std::size_t>(opts.topk, 2)),
                 ctx.model.info().vocab_size);
    }
    mr.margins.push_back(m);
    const MarginDecision decision = decide(m, words, gate);

    if (decision.verdict == Verdict::diversify) {
      const BranchSet set =
          explore_exploit(ctx.model, ctx.prefix, round_text, cfg.branching_factor, opts, &w);
      for (std::size_t b = 0; b < set.branches.size(); ++b) {
        const auto& branch = set.branches[b];
        mr.candidates.push_back(make_candidate(ctx, round_text + branch.word_text,
                                               words + word_units(branch.word_text),
                                               branch.terminal == WordTerminal::eos, b));
      }
      mr.trigger = RoundTrigger::diversified;
      return mr;
    }

    round_text += w.word_text;
    words += word_units(w.word_text);
    if (w.terminal == WordTerminal::eos) {
      mr.candidates.push_back(make_candidate(ctx, round_text, words, true, std::nullopt));
      mr.trigger = RoundTrigger::eos;
      return mr;
    }
    if (decision.verdict == Verdict::commit_and_halt) {
      mr.trigger = RoundTrigger::low_margin_halt;
      break;
    }
  }
  mr.candidates.push_back(make_candidate(ctx, round_text, words, false, std::nullopt));
  return mr;
}

ModelRound fixed_round(const RoundContext& ctx) {
  const DecodeConfig& cfg = ctx.config;
  WordOptions opts = word_options(cfg);
  const std::size_t target = std::min(cfg.fixed_length, ctx.word_budget);

  ModelRound mr;
  mr.model_id = ctx.model.info().model_id;
  mr.trigger = RoundTrigger::fixed_length;
  std::string round_text;
  std::size_t words = 0;
  bool eos = false;
  while (words < target) {
    WordProposal w = gen_word(ctx.model, ctx.prefix, round_text, std::nullopt, opts);
    mr.margins.push_back(margin(w.first_token_dist, ctx.model.info().vocab_size));
    round_text += w.word_text;
    words += word_units(w.word_text);
    if (w.terminal == WordTerminal::eos) {
      eos = true;
      break;
    }
  }
  mr.candidates.push_back(make_candidate(ctx, round_text, words, eos, std::nullopt));
  return mr;
}

struct Beam {
  TokenSequence tokens;
  std::string text;
  double score = 0.0;
  bool finished = false;
};

ModelRound beam_round(const RoundContext& ctx) {
  const DecodeConfig& cfg = ctx.config;
  const LanguageModel& model = ctx.model;
  const std::size_t width = cfg.branching_factor;
  const TokenId eos = model.info().eos_token;
  const TokenSequence context = model.encode(ctx.prefix.text);

  ModelRound mr;
  mr.model_id = model.info().model_id;
  mr.trigger = RoundTrigger::beam_round;

  std::vector<Beam> beams(1);
  for (std::size_t step = 0; step < cfg.beam_round_tokens; ++step) {
    std::vector<Beam> expanded;
    for (const Beam& beam : beams) {
      if (beam.finished) {
        expanded.push_back(beam);
        continue;
      }
      TokenSequence full = context;
      full.insert(full.end(), beam.tokens.begin(), beam.tokens.end());
      check_context(model, full.size() + 1);
      const TokenDistribution dist = model.topk(full, std::max<std::size_t>(width, 2));
      if (step == 0 && beams.size() == 1) {
        mr.margins.push_back(margin(dist, model.info().vocab_size));
      }
      std::size_t taken = 0;
      for (const auto& entry : dist.entries) {
        if (taken == width) break;
        if (std::exp(entry.logprob) <= 0.0) break;
        Beam next = beam;
        next.tokens.push_back(entry.token);
        next.score += entry.logprob;
        if (entry.token == eos) {
          next.finished = true;
        } else {
          next.text += entry.surface;
        }
        expanded.push_back(std::move(next));
        ++taken;
      }
    }
    // Stable: equal scores keep generation order.
    std::stable_sort(expanded.begin(), expanded.end(),
                     [](const Beam& a, const Beam& b) { return a.score > b.score; });
    if (expanded.size() > width) expanded.resize(width);
    beams = std::move(expanded);
    if (std::all_of(beams.begin(), beams.end(), [](const Beam& b) { return b.finished; })) break;
  }

  for (std::size_t b = 0; b < beams.size(); ++b) {
    const Beam& beam = beams[b];
    if (auto end = text::first_word_end(beam.text)) {
      std::string word = beam.text.substr(0, *end);
      word += text::word_separator(beam.text, *end);
      mr.candidates.push_back(make_candidate(ctx, std::move(word), 1, false, b));
    } else if (beam.finished) {
      std::string word = text::has_content(beam.text) ? beam.text : std::string();
      const std::size_t units = word_units(word);
      mr.candidates.push_back(make_candidate(ctx, std::move(word), units, true, b));
    } else if (text::has_content(beam.text)) {
      mr.candidates.push_back(make_candidate(ctx, beam.text + " ", 1, false, b));
    }
  }
  if (mr.candidates.empty()) {
    throw EmptyWordError(model.info().model_id + ": no beam produced a word within " +
                         std::to_string(cfg.beam_round_tokens) + " tokens");
  }
  return mr;
}

// Position in `combined` where the earliest stop sequence starts at or after
// `from`, if any.
std::optional<std::size_t> find_stop(std::string_view combined, std::size_t from,
                                     const std::vector<std::string>& stops) {
  std::optional<std::size_t> best;
  for (const auto& s : stops) {
    const std::size_t start = from >= s.size() - 1 ? from - (s.size() - 1) : 0;
    const std::size_t pos = combined.find(s, start);
    if (pos != std::string_view::npos && (!best || pos < *best)) best = pos;
  }
  return best;
}

}  // namespace

DecodeResult decode(std::string_view prompt, std::span<const LanguageModel* const> models,
                    const DecodeConfig& config) {
  config.validate();
  if (models.empty()) throw std::invalid_argument("decode: at least one model is required");
  std::set<std::string> ids;
  for (const auto* m : models) {
    if (m == nullptr) throw std::invalid_argument("decode: null model");
    if (!ids.insert(m->info().model_id).second) {
      throw std::invalid_argument("decode: duplicate model_id '" + m->info().model_id + "'");
    }
  }

  const auto started = std::chrono::steady_clock::now();
  std::vector<std::unique_ptr<InstrumentedModel>> wrapped;
  std::vector<const LanguageModel*> counted;
  for (const auto* m : models) {
    wrapped.push_back(std::make_unique<InstrumentedModel>(*m));
    counted.push_back(wrapped.back().get());
  }

  DecodeResult result;
  DecodeTrace& trace = result.trace;
  Prefix prefix{std::string(prompt)};
  std::size_t words = 0;
  std::size_t round = 0;

  try {
    while (true) {
      if (words >= config.max_new_words) {
        trace.stop_reason = StopReason::max_new_words;
        break;
      }
      if (result.output.size() >= config.max_new_chars) {
        trace.stop_reason = StopReason::max_new_chars;
        break;
      }

      RoundTrace rt;
      rt.index = round;
      rt.models.resize(counted.size());
      const std::size_t budget = config.max_new_words - words;
      detail::parallel_for(counted.size(), config.jobs, [&](std::size_t k) {
        RoundContext ctx{*counted[k], k, prefix, config, budget};
        switch (config.mode) {
          case DecodeMode::adafuse: rt.models[k] = adaptive_round(ctx); break;
          case DecodeMode::fixed_length: rt.models[k] = fixed_round(ctx); break;
          case DecodeMode::beam_round: rt.models[k] = beam_round(ctx); break;
        }
      });

      std::vector<std::vector<SpanCandidate>> by_model;
      by_model.reserve(rt.models.size());
      for (const auto& mr : rt.models) {
        by_model.push_back(mr.candidates);
        rt.diversified = rt.diversified || mr.trigger == RoundTrigger::diversified;
      }
      if (config.mode == DecodeMode::beam_round && config.branching_factor > 1) {
        rt.diversified = true;
      }
      rt.pool = pool(by_model);
      Selection sel = select(rt.pool, counted, prefix, config.jobs);
      rt.scores = std::move(sel.scores);
      rt.winner = sel.winner;
      const SpanCandidate& win = rt.pool[rt.winner];

      std::string committed = win.span_text;
      std::size_t committed_words = win.word_count;
      bool stopped = false;
      if (!config.stop_sequences.empty()) {
        const std::string combined = result.output + committed;
        if (auto pos = find_stop(combined, result.output.size(), config.stop_sequences)) {
          const std::size_t keep = *pos > result.output.size() ? *pos - result.output.size() : 0;
          committed.resize(keep);
          committed_words = text::split_words(committed).size();
          stopped = true;
        }
      }

      prefix.text += committed;
      result.output += committed;
      words += committed_words;
      rt.committed_text = committed;
      rt.words_committed = committed_words;
      trace.rounds.push_back(std::move(rt));
      ++round;

      if (stopped) {
        trace.stop_reason = StopReason::stop_sequence;
        break;
      }
      if (win.is_eos) {
        trace.stop_reason = StopReason::eos;
        break;
      }
    }
  } catch (const std::exception& e) {
    result.error = DecodeFailure{round, e.what()};
    trace.stop_reason = StopReason::error;
  }

  trace.totals.rounds = trace.rounds.size();
  trace.totals.words = words;
  for (const auto& w : wrapped) {
    trace.totals.provider_forward_calls += w->topk_calls();
    trace.totals.scoring_calls += w->score_calls();
  }
  trace.totals.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

DecodeResult decode_fixed(std::string_view prompt, std::span<const LanguageModel* const> models,
                          DecodeConfig config) {
  config.mode = DecodeMode::fixed_length;
  return decode(prompt, models, config);
}

DecodeResult decode_beam_round(std::string_view prompt,
                               std::span<const LanguageModel* const> models, DecodeConfig config) {
  config.mode = DecodeMode::beam_round;
  return decode(prompt, models, config);
}

}  // namespace adafuse
