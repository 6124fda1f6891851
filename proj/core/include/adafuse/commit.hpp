#pragma once

#include <cstddef>
#include <string_view>

#include "adafuse/lm_core.hpp"

namespace adafuse {

struct GateConfig {
  double tau_delta = 0.7;
  std::size_t max_words_per_round = 3;
  bool diversity_enabled = false;
};

enum class Verdict { commit_and_continue, commit_and_halt, diversify };

std::string_view to_string(Verdict verdict);

struct MarginDecision {
  double margin = 0.0;
  double threshold = 0.0;
  Verdict verdict = Verdict::commit_and_halt;
  std::size_t words_committed_so_far = 0;
};

// Start-of-word confidence p(1) - p(2), clamped to [0, 1]. A single-entry
// distribution is accepted only when the provider's vocabulary has one entry.
double margin(const TokenDistribution& dist, std::size_t vocab_size = 0);

// Gate for the word about to be committed when `words_committed` words are
// already in the round. Passing (margin >= tau, inclusive) continues the round
// while it still has room; failing either diversifies or commits the current
// word and ends the round.
MarginDecision decide(double margin_value, std::size_t words_committed, const GateConfig& config);

}  // namespace adafuse
