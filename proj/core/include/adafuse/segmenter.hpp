#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "adafuse/lm_core.hpp"

namespace adafuse {

enum class WordTerminal { boundary, eos, token_cap };

std::string_view to_string(WordTerminal terminal);

// One complete word proposed by one model.
//
// word_text is any leading whitespace the model produced, then one
// non-whitespace run, then one separator (terminal == boundary): a space, or
// "\n" when the boundary whitespace held a line feed. An EOS
// word carries no trailing space and may be empty; a capped word gets a
// forced trailing space.
struct WordProposal {
  std::string word_text;
  TokenSequence token_path;
  TokenDistribution first_token_dist;
  WordTerminal terminal = WordTerminal::boundary;
};

struct WordOptions {
  std::size_t max_word_tokens = 16;
  // Top-k requested at every step; the first-token slice must cover the
  // margin (>= 2) and the branching factor.
  std::size_t topk = 2;
};

// Greedy word completion after prefix||round_text, optionally forcing the
// first token. Boundaries are detected on the decoded text: the word ends at
// the first whitespace that follows non-whitespace content. Whitespace that
// trails the word inside the same token is normalized to one separator.
//
// Throws std::invalid_argument if `seed` is not in the first-token slice and
// EmptyWordError if the cap is reached before any non-whitespace content.
WordProposal gen_word(const LanguageModel& model, const Prefix& prefix,
                      std::string_view round_text, std::optional<TokenId> seed,
                      const WordOptions& options = {});

}  // namespace adafuse
