#pragma once

// Protocol conformance checks for any provider, usually a RemoteModel
// pointed at a server. With a reference provider the subject must also agree
// with it call for call.

#include <string>
#include <vector>

#include "adafuse/lm_core.hpp"

namespace adafuse {

struct ConformanceCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ConformanceReport {
  std::vector<ConformanceCheck> checks;

  bool passed() const;
  // One "PASS name" / "FAIL name: detail" line per check.
  std::string to_text() const;
};

struct ConformanceOptions {
  // Extra texts to probe; texts built from the first vocabulary entries are
  // always added.
  std::vector<std::string> probe_texts;
  std::size_t k = 8;
  std::size_t greedy_steps = 4;
  double logprob_tolerance = 1e-9;
  std::size_t normalization_vocab_limit = 4096;  // skip the sum-to-one check above this
};

ConformanceReport run_conformance(const LanguageModel& subject,
                                  const LanguageModel* reference = nullptr,
                                  const ConformanceOptions& options = {});

}  // namespace adafuse
