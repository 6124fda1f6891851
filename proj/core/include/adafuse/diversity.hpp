#pragma once

#include <string_view>
#include <vector>

#include "adafuse/segmenter.hpp"

namespace adafuse {

struct BranchSet {
  std::vector<WordProposal> branches;
  std::size_t branching_factor = 0;
};

// Two-stage word search. Exploration takes the top-B distinct first tokens
// with non-zero probability at prefix||round_text (ties by ascending id);
// exploitation completes each greedily with gen_word. The branch count clips
// to the number of available tokens, and branch 0 is always the plain greedy
// word. Two branches may still decode to the same text.
//
// When `greedy` is the unseeded gen_word result at the same position it is
// reused as branch 0 instead of being regenerated.
BranchSet explore_exploit(const LanguageModel& model, const Prefix& prefix,
                          std::string_view round_text, std::size_t branching_factor,
                          const WordOptions& options = {}, const WordProposal* greedy = nullptr);

}  // namespace adafuse
