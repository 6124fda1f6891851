#include "adafuse/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <utility>

#include "adafuse/errors.hpp"
#include "parallel.hpp"

namespace adafuse {

double mismatch_penalty() { return -std::log(kMismatchEpsilon); }

std::vector<SpanCandidate> pool(const std::vector<std::vector<SpanCandidate>>& by_model) {
  std::vector<SpanCandidate> out;
  std::set<std::pair<std::string, bool>> seen;
  for (const auto& candidates : by_model) {
    for (const auto& c : candidates) {
      if (seen.emplace(c.span_text, c.is_eos).second) out.push_back(c);
    }
  }
  if (out.empty()) throw EmptyPoolError("no span candidates from any model");
  return out;
}

ModelScore span_nll(const LanguageModel& model, const Prefix& prefix,
                    const SpanCandidate& candidate) {
  const auto logprobs = score_continuation(model, prefix, candidate.span_text, candidate.is_eos);
  ModelScore score;
  score.model_id = model.info().model_id;
  score.token_count = logprobs.size();
  if (logprobs.empty()) throw EncodingMismatchError(score.model_id + ": span has no tokens");
  const double sum = std::accumulate(logprobs.begin(), logprobs.end(), 0.0);
  score.nll = -sum / static_cast<double>(logprobs.size());
  return score;
}

Selection select(std::span<const SpanCandidate> candidates,
                 std::span<const LanguageModel* const> models, const Prefix& prefix,
                 std::size_t jobs) {
  if (candidates.empty()) throw EmptyPoolError("select: empty pool");
  if (models.empty()) throw std::invalid_argument("select: no models");

  const std::size_t n_models = models.size();
  Selection sel;
  sel.scores.resize(candidates.size());
  for (auto& fs : sel.scores) fs.per_model.resize(n_models);

  detail::parallel_for(candidates.size() * n_models, jobs, [&](std::size_t cell) {
    const std::size_t c = cell / n_models;
    const std::size_t m = cell % n_models;
    ModelScore& out = sel.scores[c].per_model[m];
    try {
      out = span_nll(*models[m], prefix, candidates[c]);
    } catch (const EncodingMismatchError&) {
      out.model_id = models[m]->info().model_id;
      out.nll = mismatch_penalty();
      out.token_count = 1;
      out.penalized = true;
    }
  });

  bool any_scored = false;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    auto& fs = sel.scores[c];
    // Summed in sorted order so the fused value is exactly invariant under
    // reordering of the ensemble.
    std::vector<double> nlls;
    nlls.reserve(n_models);
    for (const auto& ms : fs.per_model) {
      nlls.push_back(ms.nll);
      any_scored = any_scored || !ms.penalized;
    }
    std::sort(nlls.begin(), nlls.end());
    fs.fused = std::accumulate(nlls.begin(), nlls.end(), 0.0) / static_cast<double>(n_models);
    if (fs.fused < sel.scores[sel.winner].fused) sel.winner = c;
  }
  if (!any_scored) throw UnscorableError("no model could score any pooled candidate");
  return sel;
}

}  // namespace adafuse
