#include "adafuse/lm_core.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "adafuse/errors.hpp"

namespace adafuse {

void check_context(const LanguageModel& model, std::size_t length) {
  const auto& info = model.info();
  if (length > info.max_context_tokens) {
    throw ContextOverflowError("context of " + std::to_string(length) + " tokens exceeds " +
                               info.model_id + " capability of " +
                               std::to_string(info.max_context_tokens));
  }
}

TokenDistribution next_token_topk(const LanguageModel& model, const Prefix& prefix,
                                  std::span<const TokenId> partial_word_tokens, std::size_t k) {
  if (k < 2) throw std::invalid_argument("next_token_topk: k must be at least 2");
  TokenSequence context = model.encode(prefix.text);
  context.insert(context.end(), partial_word_tokens.begin(), partial_word_tokens.end());
  check_context(model, context.size());
  return model.topk(context, k);
}

namespace {

bool decodes_to(const LanguageModel& model, std::span<const TokenId> tokens,
                std::string_view expected) {
  try {
    return model.decode(tokens) == expected;
  } catch (const InvalidTokenError&) {
    return false;
  }
}

struct JointEncoding {
  TokenSequence tokens;
  std::size_t split = 0;
};

JointEncoding split_joint(const LanguageModel& model, std::string_view prefix_text,
                          std::string_view continuation_text) {
  std::string joined(prefix_text);
  joined.append(continuation_text);
  JointEncoding joint;
  TokenSequence alone;
  try {
    joint.tokens = model.encode(joined);
    alone = model.encode(prefix_text);
  } catch (const InvalidTokenError& e) {
    throw EncodingMismatchError(model.info().model_id + ": " + e.what());
  }
  const TokenSequence& full = joint.tokens;
  const std::span<const TokenId> all(full);

  // Fast path: the standalone prefix encoding is a token prefix of the joint
  // encoding; grow it while longer slices still decode to the prefix text.
  std::size_t split = full.size() + 1;
  if (alone.size() <= full.size() && std::equal(alone.begin(), alone.end(), full.begin()) &&
      decodes_to(model, all.first(alone.size()), prefix_text)) {
    split = alone.size();
    while (split < full.size() && decodes_to(model, all.first(split + 1), prefix_text)) ++split;
  } else {
    for (std::size_t i = full.size() + 1; i-- > 0;) {
      if (decodes_to(model, all.first(i), prefix_text)) {
        split = i;
        break;
      }
    }
  }
  if (split > full.size()) {
    throw EncodingMismatchError(model.info().model_id +
                                ": no token boundary at the end of the prefix text");
  }
  if (!continuation_text.empty() && split == full.size()) {
    throw EncodingMismatchError(model.info().model_id + ": continuation merged into the prefix");
  }
  for (std::size_t i = split; i < full.size(); ++i) {
    if (full[i] >= model.info().vocab_size) {
      throw EncodingMismatchError(model.info().model_id +
                                  ": continuation contains an out-of-vocabulary symbol");
    }
  }
  joint.split = split;
  return joint;
}

}  // namespace

TokenSequence continuation_tokens(const LanguageModel& model, std::string_view prefix_text,
                                  std::string_view continuation_text) {
  JointEncoding joint = split_joint(model, prefix_text, continuation_text);
  return TokenSequence(joint.tokens.begin() + static_cast<std::ptrdiff_t>(joint.split),
                       joint.tokens.end());
}

std::vector<double> score_continuation(const LanguageModel& model, const Prefix& prefix,
                                       std::string_view continuation_text, bool close_with_eos) {
  if (continuation_text.empty() && !close_with_eos) {
    throw std::invalid_argument("score_continuation: empty continuation");
  }
  // A bare EOS goes through the same boundary check, so a prefix the model
  // cannot represent penalizes every candidate alike.
  JointEncoding joint = split_joint(model, prefix.text, continuation_text);
  const auto cut = joint.tokens.begin() + static_cast<std::ptrdiff_t>(joint.split);
  TokenSequence context(joint.tokens.begin(), cut);
  TokenSequence tail(cut, joint.tokens.end());
  if (close_with_eos) tail.push_back(model.info().eos_token);

  check_context(model, context.size() + tail.size());
  return model.score_tokens(context, tail);
}

void validate_distribution(const TokenDistribution& dist, std::size_t k, std::size_t vocab_size) {
  if (dist.entries.size() > k) {
    throw ProtocolError("candidates: " + std::to_string(dist.entries.size()) +
                        " entries returned for k=" + std::to_string(k));
  }
  for (std::size_t i = 0; i < dist.entries.size(); ++i) {
    const auto& e = dist.entries[i];
    if (e.token >= vocab_size) {
      throw ProtocolError("candidates[" + std::to_string(i) + "].token: id " +
                          std::to_string(e.token) + " outside vocabulary");
    }
    if (!(e.logprob <= 0.0)) {
      throw ProtocolError("candidates[" + std::to_string(i) + "].logprob: positive or NaN");
    }
    if (i > 0) {
      const auto& prev = dist.entries[i - 1];
      const bool ordered = prev.logprob > e.logprob ||
                           (prev.logprob == e.logprob && prev.token < e.token);
      if (!ordered) {
        throw ProtocolError("candidates[" + std::to_string(i) +
                            "]: top-k not sorted by logprob desc, token id asc");
      }
    }
  }
}

}  // namespace adafuse
