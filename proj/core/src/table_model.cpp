#include "adafuse/table_model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "adafuse/errors.hpp"
#include "adafuse/text.hpp"

namespace adafuse {

TableModel::TableModel(std::string model_id, std::map<std::string, std::vector<TableEntry>> table,
                       std::optional<std::vector<TableEntry>> fallback)
    : table_(std::move(table)), fallback_(std::move(fallback)) {
  std::set<std::string> alphabet;
  auto add_entries = [&](const std::vector<TableEntry>& entries) {
    for (const auto& e : entries) {
      if (e.prob < 0.0 || e.prob > 1.0) throw std::invalid_argument("table probability out of range");
      if (e.surface.empty()) throw std::invalid_argument("table surface must be non-empty");
      if (e.surface != kEosSurface) alphabet.insert(e.surface);
    }
  };
  for (const auto& [ctx, entries] : table_) {
    for (auto cp : text::codepoints(ctx)) alphabet.emplace(cp);
    add_entries(entries);
  }
  if (fallback_) add_entries(*fallback_);

  surfaces_.emplace_back(kEosSurface);
  for (const auto& s : alphabet) {
    index_.emplace(s, static_cast<TokenId>(surfaces_.size()));
    surfaces_.push_back(s);
    longest_surface_ = std::max(longest_surface_, s.size());
  }
  info_.model_id = std::move(model_id);
  info_.eos_surface = std::string(kEosSurface);
  info_.eos_token = 0;
  info_.vocab_size = surfaces_.size();
  info_.max_context_tokens = std::size_t{1} << 20;
}

TableModel TableModel::deterministic(std::string model_id,
                                     const std::map<std::string, std::string>& transitions,
                                     std::optional<std::string> fallback) {
  std::map<std::string, std::vector<TableEntry>> table;
  for (const auto& [ctx, next] : transitions) table[ctx] = {{next, 1.0}};
  std::optional<std::vector<TableEntry>> fb;
  if (fallback) fb = std::vector<TableEntry>{{*fallback, 1.0}};
  return TableModel(std::move(model_id), std::move(table), std::move(fb));
}

TokenId TableModel::token_of(std::string_view surface) const {
  if (surface == kEosSurface) return 0;
  auto it = index_.find(std::string(surface));
  if (it == index_.end()) {
    throw std::invalid_argument("surface '" + std::string(surface) + "' not in table vocabulary");
  }
  return it->second;
}

TokenSequence TableModel::encode(std::string_view s) const {
  TokenSequence out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    std::size_t len = std::min(longest_surface_, s.size() - pos);
    for (; len > 0; --len) {
      auto it = index_.find(std::string(s.substr(pos, len)));
      if (it != index_.end()) {
        out.push_back(it->second);
        pos += len;
        break;
      }
    }
    if (len == 0) {
      throw InvalidTokenError(info_.model_id + ": text not representable at byte " +
                              std::to_string(pos));
    }
  }
  return out;
}

std::string TableModel::decode(std::span<const TokenId> tokens) const {
  std::string out;
  for (TokenId t : tokens) {
    if (t >= surfaces_.size()) {
      throw InvalidTokenError(info_.model_id + ": token id " + std::to_string(t) +
                              " is outside the vocabulary");
    }
    if (t != 0) out += surfaces_[t];
  }
  return out;
}

std::vector<double> TableModel::row(std::span<const TokenId> context) const {
  const std::string ctx = decode(context);
  const std::vector<TableEntry>* entries = nullptr;
  if (auto it = table_.find(ctx); it != table_.end()) {
    entries = &it->second;
  } else if (fallback_) {
    entries = &*fallback_;
  } else {
    throw UnreachableContextError(info_.model_id + ": no transition for context '" + ctx + "'");
  }
  std::vector<double> out(surfaces_.size(), kFloorLogprob);
  for (const auto& e : *entries) {
    if (e.prob > 0.0) out[token_of(e.surface)] = std::log(e.prob);
  }
  return out;
}

TokenDistribution TableModel::topk(std::span<const TokenId> context, std::size_t k) const {
  const auto lp = row(context);
  std::vector<TokenId> ids(lp.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<TokenId>(i);
  std::stable_sort(ids.begin(), ids.end(), [&](TokenId a, TokenId b) { return lp[a] > lp[b]; });
  TokenDistribution dist;
  dist.k = k;
  for (std::size_t i = 0; i < std::min(k, ids.size()); ++i) {
    const TokenId id = ids[i];
    dist.entries.push_back({id, lp[id], id == 0 ? std::string() : surfaces_[id]});
  }
  return dist;
}

std::vector<double> TableModel::score_tokens(std::span<const TokenId> context,
                                             std::span<const TokenId> continuation) const {
  TokenSequence history(context.begin(), context.end());
  std::vector<double> out;
  for (TokenId t : continuation) {
    if (t >= surfaces_.size()) throw InvalidTokenError(info_.model_id + ": cannot score token");
    out.push_back(row(history)[t]);
    history.push_back(t);
  }
  return out;
}

}  // namespace adafuse
