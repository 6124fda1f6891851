#pragma once

// Cross-model scoring of pooled span candidates.
//
// Each model scores a span by its own normalized NLL (mean per-token surprise
// over that model's token count for the span); the fusion score is the mean
// of those NLLs across all K models and the winner is the argmin.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adafuse/lm_core.hpp"

namespace adafuse {

struct CandidateOrigin {
  std::size_t model_index = 0;
  std::string model_id;
  std::optional<std::size_t> branch;  // nullopt for the greedy span

  bool operator==(const CandidateOrigin&) const = default;
};

struct SpanCandidate {
  std::string span_text;
  std::size_t word_count = 0;
  CandidateOrigin origin;
  bool is_eos = false;

  bool operator==(const SpanCandidate&) const = default;
};

struct ModelScore {
  std::string model_id;
  double nll = 0.0;
  std::size_t token_count = 0;
  bool penalized = false;  // encoding mismatch; nll is the fixed penalty
};

struct FusionScore {
  std::vector<ModelScore> per_model;  // ensemble order
  double fused = 0.0;
};

// Epsilon of the -ln(eps) NLL charged by a model that cannot encode a span.
inline constexpr double kMismatchEpsilon = 1e-9;
double mismatch_penalty();

// Union over models; exact-text duplicates collapse onto their first
// occurrence (model order, then branch order). Throws EmptyPoolError.
std::vector<SpanCandidate> pool(const std::vector<std::vector<SpanCandidate>>& by_model);

// Normalized NLL of the span under one model, scored against the round-start
// prefix. EOS candidates are closed with the model's EOS token. Encoding
// mismatches propagate.
ModelScore span_nll(const LanguageModel& model, const Prefix& prefix,
                    const SpanCandidate& candidate);

struct Selection {
  std::size_t winner = 0;  // index into the pool
  std::vector<FusionScore> scores;
};

// Scores every candidate under every model and returns the argmin of the
// fused score, ties going to the earlier pooled candidate. Up to `jobs`
// scoring calls run concurrently; results do not depend on `jobs`.
Selection select(std::span<const SpanCandidate> candidates,
                 std::span<const LanguageModel* const> models, const Prefix& prefix,
                 std::size_t jobs = 1);

}  // namespace adafuse
