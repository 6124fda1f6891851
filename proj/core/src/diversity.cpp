#include "adafuse/diversity.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "adafuse/errors.hpp"

namespace adafuse {

BranchSet explore_exploit(const LanguageModel& model, const Prefix& prefix,
                          std::string_view round_text, std::size_t branching_factor,
                          const WordOptions& options, const WordProposal* greedy) {
  if (branching_factor == 0) throw std::invalid_argument("branching factor must be >= 1");
  WordOptions opts = options;
  opts.topk = std::max(opts.topk, branching_factor);

  const bool reuse = greedy != nullptr && !greedy->token_path.empty() &&
                     greedy->first_token_dist.k >= branching_factor;
  TokenDistribution first;
  if (reuse) {
    first = greedy->first_token_dist;
  } else {
    std::string context_text = prefix.text;
    context_text.append(round_text);
    const TokenSequence context = model.encode(context_text);
    check_context(model, context.size() + 1);
    first = model.topk(context, std::max<std::size_t>(opts.topk, 2));
  }

  std::vector<TokenId> seeds;
  for (const auto& entry : first.entries) {
    if (seeds.size() == branching_factor) break;
    if (std::exp(entry.logprob) <= 0.0) break;
    seeds.push_back(entry.token);
  }
  if (seeds.empty()) {
    throw InsufficientCandidatesError(model.info().model_id +
                                      ": no first token with non-zero probability");
  }

  BranchSet set;
  set.branching_factor = branching_factor;
  set.branches.reserve(seeds.size());
  for (std::size_t b = 0; b < seeds.size(); ++b) {
    if (b == 0 && reuse && greedy->token_path.front() == seeds.front()) {
      set.branches.push_back(*greedy);
    } else {
      set.branches.push_back(gen_word(model, prefix, round_text, seeds[b], opts));
    }
  }
  return set;
}

}  // namespace adafuse
