#pragma once

// Model-agnostic provider interface and the shared token/text data model.
//
// Every model owns a private vocabulary; TokenIds from different models are
// never compared. The committed prefix is canonical text that each model
// re-encodes with its own tokenizer, which is what lets models with
// heterogeneous tokenizers share one decoding state.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace adafuse {

using TokenId = std::uint32_t;
using TokenSequence = std::vector<TokenId>;

struct TokenCandidate {
  TokenId token = 0;
  double logprob = 0.0;
  std::string surface;

  bool operator==(const TokenCandidate&) const = default;
};

// Top slice of a next-token distribution. Entries are sorted by logprob
// descending, ties by ascending token id; the provider certifies that the
// full-vocabulary distribution these entries come from sums to one.
struct TokenDistribution {
  std::vector<TokenCandidate> entries;
  std::size_t k = 0;

  bool operator==(const TokenDistribution&) const = default;
};

struct ModelInfo {
  std::string model_id;
  std::string eos_surface;
  std::size_t max_context_tokens = 0;
  std::size_t vocab_size = 0;
  TokenId eos_token = 0;
};

// Stateless causal LM. Implementations must return bit-identical results for
// identical arguments. Concurrent calls are allowed unless thread_safe()
// returns false, in which case callers serialize access.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;

  virtual const ModelInfo& info() const = 0;

  virtual TokenSequence encode(std::string_view text) const = 0;
  // Throws InvalidTokenError for ids outside the vocabulary. The EOS token
  // decodes to the empty string.
  virtual std::string decode(std::span<const TokenId> tokens) const = 0;

  // Top-k next tokens after `context` (a full encoded sequence).
  virtual TokenDistribution topk(std::span<const TokenId> context, std::size_t k) const = 0;

  // Teacher-forced log-probabilities of each continuation token.
  virtual std::vector<double> score_tokens(std::span<const TokenId> context,
                                           std::span<const TokenId> continuation) const = 0;

  virtual bool thread_safe() const { return true; }
};

// Canonical committed text: prompt plus every selected span.
struct Prefix {
  std::string text;
};

// Throws ContextOverflowError when `length` exceeds the model's capability.
void check_context(const LanguageModel& model, std::size_t length);

// Top-k next tokens conditioned on the prefix text followed by a partial word.
TokenDistribution next_token_topk(const LanguageModel& model, const Prefix& prefix,
                                  std::span<const TokenId> partial_word_tokens, std::size_t k);

// Continuation tokens under the encoding-boundary rule: encode
// prefix||continuation and keep the tokens beyond the longest leading slice
// that decodes exactly to the prefix text. Throws EncodingMismatchError when
// no such slice exists or nothing is left over.
TokenSequence continuation_tokens(const LanguageModel& model, std::string_view prefix_text,
                                  std::string_view continuation_text);

// One logprob per continuation token (the model-specific token count). With
// `close_with_eos` the model's EOS token is appended to the continuation.
std::vector<double> score_continuation(const LanguageModel& model, const Prefix& prefix,
                                       std::string_view continuation_text,
                                       bool close_with_eos = false);

// Sortedness, bounds and size checks on a distribution; throws ProtocolError.
void validate_distribution(const TokenDistribution& dist, std::size_t k, std::size_t vocab_size);

}  // namespace adafuse
