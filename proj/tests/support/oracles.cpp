#include "oracles.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <stdexcept>

namespace adafuse::testing {

namespace {

const std::string kBegin = "\x02<bos>";

bool space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool has_word(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](char c) { return !space(c); });
}

// End of the first whitespace that follows a non-space character.
std::optional<std::size_t> word_end(std::string_view s) {
  bool seen = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!space(s[i])) seen = true;
    else if (seen) return i;
  }
  return std::nullopt;
}

}  // namespace

OracleNgram::OracleNgram(const std::vector<std::string>& corpus, int order, double alpha,
                         TokenizerKind kind)
    : order_(order), alpha_(alpha), kind_(kind) {
  std::set<std::string> symbols;
  for (const auto& doc : corpus) {
    std::vector<std::string> seq(static_cast<std::size_t>(order - 1), kBegin);
    for (auto& s : symbolize(doc, kind)) {
      symbols.insert(s);
      seq.push_back(std::move(s));
    }
    seq.push_back(kEnd);
    for (std::size_t i = static_cast<std::size_t>(order - 1); i < seq.size(); ++i) {
      std::vector<std::string> ctx(seq.begin() + static_cast<std::ptrdiff_t>(i) - (order - 1),
                                   seq.begin() + static_cast<std::ptrdiff_t>(i));
      ++counts_[ctx][seq[i]];
    }
  }
  vocab_.push_back(kEnd);
  vocab_.insert(vocab_.end(), symbols.begin(), symbols.end());
  for (std::size_t i = 0; i < vocab_.size(); ++i) ids_[vocab_[i]] = i;
}

std::vector<std::string> OracleNgram::symbolize(std::string_view text, TokenizerKind kind) {
  std::vector<std::string> out;
  if (kind == TokenizerKind::character) {
    for (char c : text) out.emplace_back(1, c);
    return out;
  }
  std::string run;
  for (char c : text) {
    if (space(c)) {
      if (!run.empty()) out.push_back(std::move(run));
      run.clear();
      out.emplace_back(1, c);
    } else {
      run += c;
    }
  }
  if (!run.empty()) out.push_back(std::move(run));
  return out;
}

std::vector<std::string> OracleNgram::key(const std::vector<std::string>& history) const {
  const std::size_t n = static_cast<std::size_t>(order_ - 1);
  std::vector<std::string> k(n, kBegin);
  const std::size_t take = std::min(n, history.size());
  std::copy(history.end() - static_cast<std::ptrdiff_t>(take), history.end(),
            k.end() - static_cast<std::ptrdiff_t>(take));
  return k;
}

double OracleNgram::prob(const std::vector<std::string>& history, const std::string& next) const {
  double count = 0.0;
  double total = 0.0;
  auto it = counts_.find(key(history));
  if (it != counts_.end()) {
    for (const auto& [sym, c] : it->second) {
      total += static_cast<double>(c);
      if (sym == next) count = static_cast<double>(c);
    }
  }
  return (count + alpha_) / (total + alpha_ * static_cast<double>(vocab_.size()));
}

std::vector<OracleNgram::Ranked> OracleNgram::ranked(const std::vector<std::string>& history) const {
  std::vector<Ranked> out;
  for (const auto& sym : vocab_) out.push_back({sym, prob(history, sym)});
  std::stable_sort(out.begin(), out.end(),
                   [](const Ranked& a, const Ranked& b) { return a.prob > b.prob; });
  return out;
}

std::string greedy_decode(const LanguageModel& model, std::string_view prompt, std::size_t max_words) {
  TokenSequence context = model.encode(prompt);
  const TokenId eos = model.info().eos_token;
  std::string out;
  std::size_t words = 0;
  bool in_word = false;
  for (std::size_t step = 0; step < 100000; ++step) {
    const TokenDistribution d = model.topk(context, 1);
    const TokenId t = d.entries.at(0).token;
    if (t == eos) return out;
    context.push_back(t);
    const TokenId one[] = {t};
    for (char c : model.decode(one)) {
      out += c;
      if (!space(c)) {
        in_word = true;
      } else if (in_word) {
        in_word = false;
        if (++words == max_words) return out;
      }
    }
  }
  throw std::runtime_error("greedy_decode: no termination");
}

OracleWord oracle_word(const OracleNgram& model, std::string_view context_text,
                       const std::optional<std::string>& first, std::size_t cap) {
  std::vector<std::string> history = model.symbolize(context_text);
  OracleWord w;
  std::string text;
  while (true) {
    std::string next = model.ranked(history).front().symbol;
    if (w.path.empty() && first) next = *first;
    w.path.push_back(next);
    if (next == OracleNgram::kEnd) {
      w.eos = true;
      w.text = has_word(text) ? text : std::string();
      return w;
    }
    history.push_back(next);
    text += next;
    if (auto end = word_end(text)) {
      w.text = text.substr(0, *end) + (text.find('\n', *end) != std::string::npos ? "\n" : " ");
      return w;
    }
    if (w.path.size() >= cap) {
      if (!has_word(text)) throw std::runtime_error("oracle_word: whitespace-only word at the cap");
      w.text = text + " ";
      return w;
    }
  }
}

std::vector<OracleWord> brute_force_branches(const OracleNgram& model, std::string_view context_text,
                                             std::size_t branching_factor, std::size_t cap) {
  const auto dist = model.ranked(model.symbolize(context_text));
  std::vector<OracleWord> out;
  for (const auto& r : dist) {
    if (out.size() == branching_factor || r.prob <= 0.0) break;
    out.push_back(oracle_word(model, context_text, r.symbol, cap));
  }
  return out;
}

OracleScore oracle_span_nll(const OracleNgram& model, std::string_view prefix, std::string_view span,
                            bool eos) {
  const OracleScore penalty{-std::log(1e-9), 1, true};
  std::string joined(prefix);
  joined.append(span);
  const auto syms = model.symbolize(joined);

  std::optional<std::size_t> split;
  if (prefix.empty()) split = 0;
  std::string acc;
  for (std::size_t i = 0; i < syms.size() && acc.size() < prefix.size(); ++i) {
    if (!model.known(syms[i])) break;
    acc += syms[i];
    if (acc == prefix) split = i + 1;
  }
  if (!split) return penalty;
  if (!span.empty() && *split == syms.size()) return penalty;

  std::vector<std::string> history(syms.begin(), syms.begin() + static_cast<std::ptrdiff_t>(*split));
  std::vector<std::string> cont(syms.begin() + static_cast<std::ptrdiff_t>(*split), syms.end());
  for (const auto& s : cont) {
    if (!model.known(s)) return penalty;
  }
  if (eos) cont.push_back(OracleNgram::kEnd);
  if (cont.empty()) return penalty;

  double sum = 0.0;
  for (const auto& s : cont) {
    sum += std::log(model.prob(history, s));
    history.push_back(s);
  }
  return {-sum / static_cast<double>(cont.size()), cont.size(), false};
}

namespace {

std::vector<ReferenceCandidate> reference_round(const OracleNgram& model, const std::string& prefix,
                                                std::size_t budget, const ReferenceConfig& cfg) {
  const std::size_t limit = std::min(cfg.max_words_per_round, budget);
  std::string round_text;
  std::size_t words = 0;
  std::vector<ReferenceCandidate> out;
  while (words < limit) {
    const std::string context = prefix + round_text;
    const auto dist = model.ranked(model.symbolize(context));
    const double m = std::clamp(dist[0].prob - dist[1].prob, 0.0, 1.0);
    const OracleWord w = oracle_word(model, context, std::nullopt, cfg.cap);
    if (m < cfg.tau && cfg.diversity) {
      for (const auto& b : brute_force_branches(model, context, cfg.branching_factor, cfg.cap)) {
        out.push_back({round_text + b.text, b.eos, words + (has_word(b.text) ? 1 : 0)});
      }
      return out;
    }
    round_text += w.text;
    if (has_word(w.text)) ++words;
    if (w.eos) {
      out.push_back({round_text, true, words});
      return out;
    }
    if (m < cfg.tau) break;
  }
  out.push_back({round_text, false, words});
  return out;
}

}  // namespace

ReferenceResult reference_adafuse(std::string_view prompt, const std::vector<const OracleNgram*>& models,
                                  const ReferenceConfig& config) {
  ReferenceResult result;
  std::string prefix(prompt);
  std::size_t words = 0;
  while (words < config.max_new_words && result.output.size() < config.max_new_chars) {
    ReferenceRound round;
    for (const auto* m : models) {
      for (auto& c : reference_round(*m, prefix, config.max_new_words - words, config)) {
        const bool dup = std::any_of(round.pool.begin(), round.pool.end(), [&](const auto& p) {
          return p.text == c.text && p.eos == c.eos;
        });
        if (!dup) round.pool.push_back(std::move(c));
      }
    }
    double best = 0.0;
    for (std::size_t i = 0; i < round.pool.size(); ++i) {
      double fused = 0.0;
      for (const auto* m : models) {
        fused += oracle_span_nll(*m, prefix, round.pool[i].text, round.pool[i].eos).nll;
      }
      fused /= static_cast<double>(models.size());
      if (i == 0 || fused < best) {
        best = fused;
        round.winner = i;
      }
    }
    const ReferenceCandidate win = round.pool[round.winner];
    result.rounds.push_back(std::move(round));
    prefix += win.text;
    result.output += win.text;
    words += win.words;
    if (win.eos) break;
  }
  return result;
}

}  // namespace adafuse::testing
