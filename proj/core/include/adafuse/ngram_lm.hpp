#pragma once

// Additively smoothed n-gram model used as the deterministic reference
// provider:
//
//   P(v | ctx) = (count(ctx, v) + alpha) / (total(ctx) + alpha * |V|)
//
// V is every symbol of the training corpus plus the reserved end-of-sequence
// token (id 0). Each document is padded on the left with a begin-of-sequence
// marker that is context-only and never predicted. Symbols outside V encode
// to a context-only unknown id, so such texts can be conditioned on but do
// not round-trip through decode().

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "adafuse/lm_core.hpp"

namespace adafuse {

enum class TokenizerKind {
  character,  // one token per code point; whitespace characters are tokens
  word,       // one token per non-whitespace run, one per whitespace code point
};

std::string_view to_string(TokenizerKind kind);
TokenizerKind parse_tokenizer_kind(std::string_view name);

struct NgramOptions {
  int order = 3;
  double alpha = 1.0;
  TokenizerKind tokenizer = TokenizerKind::character;
  std::string model_id;  // defaults to "ngram-<tokenizer>-<order>"
  std::size_t max_context_tokens = std::size_t{1} << 20;
};

class NgramModel final : public LanguageModel {
 public:
  static constexpr TokenId kEos = 0;
  static constexpr TokenId kBos = 0xFFFFFFFFu;
  static constexpr TokenId kUnknown = 0xFFFFFFFEu;
  static constexpr std::string_view kEosSurface = "</s>";
  static constexpr int kFormatVersion = 1;

  static NgramModel train(std::span<const std::string> corpus, const NgramOptions& options);

  static NgramModel deserialize(std::string_view data);
  static NgramModel load(const std::filesystem::path& path);
  std::string serialize() const;
  void save(const std::filesystem::path& path) const;

  const ModelInfo& info() const override { return info_; }
  TokenSequence encode(std::string_view text) const override;
  std::string decode(std::span<const TokenId> tokens) const override;
  TokenDistribution topk(std::span<const TokenId> context, std::size_t k) const override;
  std::vector<double> score_tokens(std::span<const TokenId> context,
                                   std::span<const TokenId> continuation) const override;

  // Inspection, used by oracles and the model file writer.
  int order() const { return order_; }
  double alpha() const { return alpha_; }
  TokenizerKind tokenizer() const { return tokenizer_; }
  const std::vector<std::string>& vocabulary() const { return surfaces_; }
  TokenId lookup(std::string_view surface) const;  // kUnknown when absent
  std::uint64_t count(std::span<const TokenId> history, TokenId next) const;
  std::uint64_t total(std::span<const TokenId> history) const;
  double logprob(std::span<const TokenId> history, TokenId next) const;
  // Log-probabilities of every vocabulary entry, indexed by token id.
  std::vector<double> full_distribution(std::span<const TokenId> history) const;

  // Splits text into tokenizer symbols without vocabulary lookup.
  static std::vector<std::string> symbols(std::string_view text, TokenizerKind kind);

 private:
  struct Table {
    std::uint64_t total = 0;
    // Sorted by count descending, then token id ascending.
    std::vector<std::pair<TokenId, std::uint64_t>> counts;
  };
  using Context = std::vector<TokenId>;

  NgramModel() = default;
  void finalize(std::map<Context, std::map<TokenId, std::uint64_t>>&& raw);
  Context context_key(std::span<const TokenId> history) const;
  const Table* find(std::span<const TokenId> history) const;
  double log_denominator(const Table* table) const;

  ModelInfo info_;
  int order_ = 1;
  double alpha_ = 1.0;
  TokenizerKind tokenizer_ = TokenizerKind::character;
  std::vector<std::string> surfaces_;
  std::unordered_map<std::string, TokenId> index_;
  std::map<Context, Table> tables_;
};

}  // namespace adafuse
