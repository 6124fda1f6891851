#include "adafuse/segmenter.hpp"

#include <algorithm>
#include <stdexcept>

#include "adafuse/errors.hpp"
#include "adafuse/text.hpp"

namespace adafuse {

std::string_view to_string(WordTerminal terminal) {
  switch (terminal) {
    case WordTerminal::boundary: return "boundary";
    case WordTerminal::eos: return "eos";
    case WordTerminal::token_cap: return "token_cap";
  }
  return "unknown";
}

WordProposal gen_word(const LanguageModel& model, const Prefix& prefix,
                      std::string_view round_text, std::optional<TokenId> seed,
                      const WordOptions& options) {
  if (options.max_word_tokens == 0) throw std::invalid_argument("max_word_tokens must be >= 1");
  const std::size_t k = std::max<std::size_t>(options.topk, 2);
  const TokenId eos = model.info().eos_token;

  std::string context_text = prefix.text;
  context_text.append(round_text);
  TokenSequence context = model.encode(context_text);

  WordProposal word;
  std::string text;
  while (true) {
    check_context(model, context.size() + 1);
    TokenDistribution dist = model.topk(context, k);
    if (dist.entries.empty()) {
      throw InsufficientCandidatesError(model.info().model_id + ": empty next-token distribution");
    }
    TokenCandidate chosen = dist.entries.front();
    if (word.token_path.empty()) {
      if (seed) {
        auto it = std::find_if(dist.entries.begin(), dist.entries.end(),
                               [&](const TokenCandidate& c) { return c.token == *seed; });
        if (it == dist.entries.end()) {
          throw std::invalid_argument("seed token " + std::to_string(*seed) +
                                      " is not in the first-token distribution");
        }
        chosen = *it;
      }
      word.first_token_dist = std::move(dist);
    }

    word.token_path.push_back(chosen.token);
    context.push_back(chosen.token);

    if (chosen.token == eos) {
      word.terminal = WordTerminal::eos;
      word.word_text = text::has_content(text) ? text : std::string();
      return word;
    }
    text += chosen.surface;
    if (auto end = text::first_word_end(text)) {
      word.terminal = WordTerminal::boundary;
      // A line break in the boundary survives so newline stop sequences can fire.
      word.word_text = text.substr(0, *end);
      word.word_text += text::word_separator(text, *end);
      return word;
    }
    if (word.token_path.size() >= options.max_word_tokens) {
      if (!text::has_content(text)) {
        throw EmptyWordError(model.info().model_id + ": " +
                             std::to_string(word.token_path.size()) +
                             " whitespace-only tokens without a word");
      }
      word.terminal = WordTerminal::token_cap;
      word.word_text = text + " ";
      return word;
    }
  }
}

}  // namespace adafuse
