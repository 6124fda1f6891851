#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "adafuse/lm_core.hpp"

namespace adafuse {

struct TableEntry {
  std::string surface;  // TableModel::kEosSurface denotes end of sequence
  double prob = 0.0;
};

// Explicit lookup-table LM keyed on the decoded context text. Tokens listed
// for a context get log(prob); every other vocabulary entry gets
// kFloorLogprob. The vocabulary is EOS plus every surface and every single
// character appearing in the table keys; encoding is greedy longest-match.
//
// Contexts missing from the table use `fallback` when one is given, else
// queries raise UnreachableContextError.
class TableModel final : public LanguageModel {
 public:
  static constexpr double kFloorLogprob = -1000.0;
  static constexpr std::string_view kEosSurface = "<eos>";

  TableModel(std::string model_id, std::map<std::string, std::vector<TableEntry>> table,
             std::optional<std::vector<TableEntry>> fallback = std::nullopt);

  // Probability-one transitions: context text -> next surface.
  static TableModel deterministic(std::string model_id,
                                  const std::map<std::string, std::string>& transitions,
                                  std::optional<std::string> fallback = std::nullopt);

  const ModelInfo& info() const override { return info_; }
  TokenSequence encode(std::string_view text) const override;
  std::string decode(std::span<const TokenId> tokens) const override;
  TokenDistribution topk(std::span<const TokenId> context, std::size_t k) const override;
  std::vector<double> score_tokens(std::span<const TokenId> context,
                                   std::span<const TokenId> continuation) const override;

  TokenId token_of(std::string_view surface) const;

 private:
  std::vector<double> row(std::span<const TokenId> context) const;

  ModelInfo info_;
  std::vector<std::string> surfaces_;
  std::map<std::string, TokenId> index_;
  std::map<std::string, std::vector<TableEntry>> table_;
  std::optional<std::vector<TableEntry>> fallback_;
  std::size_t longest_surface_ = 1;
};

}  // namespace adafuse
