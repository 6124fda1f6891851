#pragma once

// Round-based ensemble decoder.
//
// Every round each model builds span candidates from the shared canonical
// prefix: it commits greedy words while the start-of-word margin clears
// tau_delta (up to max_words_per_round words), and on a low margin either
// stops after the current word or, with diversity enabled, expands into
// branching_factor alternative spans. All candidates are pooled, scored by
// every model and the fused argmin is appended to the prefix. Decoding ends
// when an EOS candidate wins, a stop sequence appears, or a word/character
// budget is exhausted.
//
// Two ablation decoders share the loop: fixed_length commits exactly L words
// per round with no gate, and beam_round submits the first complete word of
// each beam after a fixed number of token-level beam steps.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adafuse/fusion.hpp"
#include "adafuse/lm_core.hpp"

namespace adafuse {

enum class DecodeMode { adafuse, fixed_length, beam_round };
// Where the gate reads its margin: the first token of the word just generated
// (default), or the first token of the word that would follow it.
enum class MarginSource { word_start, next_word };

std::string_view to_string(DecodeMode mode);
DecodeMode parse_decode_mode(std::string_view name);
std::string_view to_string(MarginSource source);
MarginSource parse_margin_source(std::string_view name);

struct DecodeConfig {
  double tau_delta = 0.7;
  std::size_t max_words_per_round = 3;
  std::size_t branching_factor = 3;
  bool diversity_enabled = false;
  std::size_t max_word_tokens = 16;
  std::size_t max_new_words = 128;
  std::size_t max_new_chars = 2048;
  std::vector<std::string> stop_sequences;
  DecodeMode mode = DecodeMode::adafuse;
  std::size_t fixed_length = 1;
  std::size_t beam_round_tokens = 5;
  std::size_t topk_for_margin = 2;
  MarginSource margin_source = MarginSource::word_start;
  std::size_t jobs = 1;

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

enum class RoundTrigger {
  confident,        // every gate passed; the round filled its word budget
  low_margin_halt,  // a gate failed with diversity off
  diversified,      // a gate failed and the model expanded into branches
  eos,              // the model ended its span with EOS
  fixed_length,
  beam_round,
};

std::string_view to_string(RoundTrigger trigger);

struct ModelRound {
  std::string model_id;
  std::vector<SpanCandidate> candidates;
  std::vector<double> margins;
  RoundTrigger trigger = RoundTrigger::confident;
};

struct RoundTrace {
  std::size_t index = 0;
  std::vector<ModelRound> models;
  std::vector<SpanCandidate> pool;
  std::vector<FusionScore> scores;
  std::size_t winner = 0;          // index into pool
  std::string committed_text;      // winner text, cut short only by a stop sequence
  std::size_t words_committed = 0;
  bool diversified = false;
};

enum class StopReason { eos, stop_sequence, max_new_words, max_new_chars, error };

std::string_view to_string(StopReason reason);

struct DecodeTotals {
  std::size_t rounds = 0;
  std::size_t provider_forward_calls = 0;  // next-token top-k queries
  std::size_t scoring_calls = 0;           // teacher-forced scoring queries
  std::size_t words = 0;
  double wall_time_seconds = 0.0;
};

// Concatenating committed_text over rounds reproduces the output exactly.
struct DecodeTrace {
  std::vector<RoundTrace> rounds;
  DecodeTotals totals;
  StopReason stop_reason = StopReason::eos;
};

struct DecodeFailure {
  std::size_t round = 0;
  std::string message;
};

struct DecodeResult {
  std::string output;  // generated text, without the prompt
  DecodeTrace trace;
  std::optional<DecodeFailure> error;  // set when a provider failed mid-decode
};

// Dispatches on config.mode. Provider failures do not throw: the partial
// output and trace come back with `error` set. Invalid configurations throw
// std::invalid_argument.
DecodeResult decode(std::string_view prompt, std::span<const LanguageModel* const> models,
                    const DecodeConfig& config);

DecodeResult decode_fixed(std::string_view prompt, std::span<const LanguageModel* const> models,
                          DecodeConfig config);

DecodeResult decode_beam_round(std::string_view prompt,
                               std::span<const LanguageModel* const> models, DecodeConfig config);

}  // namespace adafuse
