#include "adafuse/commit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "adafuse/errors.hpp"

namespace adafuse {

std::string_view to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::commit_and_continue: return "commit_and_continue";
    case Verdict::commit_and_halt: return "commit_and_halt";
    case Verdict::diversify: return "diversify";
  }
  return "unknown";
}

double margin(const TokenDistribution& dist, std::size_t vocab_size) {
  if (dist.entries.size() < 2) {
    if (dist.entries.size() == 1 && vocab_size == 1) return 1.0;
    throw InsufficientCandidatesError("margin needs the top-2 candidates, got " +
                                      std::to_string(dist.entries.size()));
  }
  const double p1 = std::exp(dist.entries[0].logprob);
  const double p2 = std::exp(dist.entries[1].logprob);
  return std::clamp(p1 - p2, 0.0, 1.0);
}

MarginDecision decide(double margin_value, std::size_t words_committed, const GateConfig& config) {
  if (words_committed > config.max_words_per_round) {
    throw std::invalid_argument("decide: words_committed exceeds max_words_per_round");
  }
  MarginDecision d;
  d.margin = margin_value;
  d.threshold = config.tau_delta;
  d.words_committed_so_far = words_committed;
  if (margin_value >= config.tau_delta) {
    d.verdict = words_committed < config.max_words_per_round ? Verdict::commit_and_continue
                                                             : Verdict::commit_and_halt;
  } else {
    d.verdict = config.diversity_enabled ? Verdict::diversify : Verdict::commit_and_halt;
  }
  return d;
}

}  // namespace adafuse
