#include "adafuse/fusion.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "adafuse/errors.hpp"
#include "adafuse/table_model.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

namespace adafuse {
namespace {

// Single-character vocabulary whose per-token logprob depends only on the
// token, minus a constant shift. Spans of one repeated character therefore
// have NLL exactly -logprob + shift.
class ScriptedModel final : public LanguageModel {
 public:
  ScriptedModel(std::string id, std::map<char, double> logprobs, double shift = 0.0)
      : logprobs_(std::move(logprobs)), shift_(shift) {
    info_.model_id = std::move(id);
    info_.eos_surface = "";
    info_.eos_token = 0;
    info_.max_context_tokens = 1 << 20;
    surfaces_.push_back('\0');
    for (const auto& [c, lp] : logprobs_) surfaces_.push_back(c);
    info_.vocab_size = surfaces_.size();
  }

  const ModelInfo& info() const override { return info_; }
  TokenSequence encode(std::string_view text) const override {
    TokenSequence out;
    for (char c : text) {
      const auto it = std::find(surfaces_.begin() + 1, surfaces_.end(), c);
      if (it == surfaces_.end()) throw InvalidTokenError(info_.model_id + ": unknown char");
      out.push_back(static_cast<TokenId>(it - surfaces_.begin()));
    }
    return out;
  }
  std::string decode(std::span<const TokenId> tokens) const override {
    std::string out;
    for (TokenId t : tokens) {
      if (t >= surfaces_.size()) throw InvalidTokenError("bad id");
      if (t != 0) out += surfaces_[t];
    }
    return out;
  }
  TokenDistribution topk(std::span<const TokenId>, std::size_t) const override { return {}; }
  std::vector<double> score_tokens(std::span<const TokenId>,
                                   std::span<const TokenId> continuation) const override {
    std::vector<double> out;
    for (TokenId t : continuation) {
      out.push_back((t == 0 ? eos_logprob_ : logprobs_.at(surfaces_[t])) - shift_);
    }
    return out;
  }

 private:
  ModelInfo info_;
  std::vector<char> surfaces_;
  std::map<char, double> logprobs_;
  double shift_;
  double eos_logprob_ = -2.0;
};

SpanCandidate cand(std::string text, std::size_t model = 0, bool eos = false) {
  SpanCandidate c;
  c.span_text = std::move(text);
  c.word_count = 1;
  c.origin.model_index = model;
  c.is_eos = eos;
  return c;
}

std::vector<std::string> texts(const std::vector<SpanCandidate>& pool) {
  std::vector<std::string> out;
  for (const auto& c : pool) out.push_back(c.span_text);
  return out;
}

TEST(Pool, ExactDuplicatesCollapse) {
  EXPECT_EQ(pool({{cand("cat ", 0)}, {cand("cat ", 1)}}).size(), 1u);
  EXPECT_EQ(pool({{cand("cat ", 0)}, {cand("cat ", 1)}})[0].origin.model_index, 0u);
}

TEST(Pool, DisjointUnionKeepsOrder) {
  EXPECT_EQ(texts(pool({{cand("cat ")}, {cand("bat ", 1), cand("rat ", 1)}})),
            (std::vector<std::string>{"cat ", "bat ", "rat "}));
  EXPECT_EQ(pool({{cand("big cat ")}, {cand("big ", 1), cand("cat ", 1)}}).size(), 3u);
}

TEST(Pool, EosFlagIsPartOfTheKey) {
  EXPECT_EQ(pool({{cand("ok", 0, true)}, {cand("ok", 1, false)}}).size(), 2u);
}

TEST(Pool, EmptyIsAnError) {
  EXPECT_THROW(pool({}), EmptyPoolError);
  EXPECT_THROW(pool({{}, {}}), EmptyPoolError);
}

TEST(SpanNll, MeanSurpriseOverTheModelsOwnTokens) {
  const TableModel m("two-step", {{"", {{"a", 0.5}, {"b", 0.5}}}, {"a", {{"b", 0.25}, {"a", 0.75}}}});
  const ModelScore s = span_nll(m, Prefix{""}, cand("ab"));
  EXPECT_EQ(s.token_count, 2u);
  EXPECT_NEAR(s.nll, 1.0397, 1e-4);
  EXPECT_DOUBLE_EQ(s.nll, -(std::log(0.5) + std::log(0.25)) / 2.0);
  EXPECT_FALSE(s.penalized);
}

TEST(SpanNll, ConstantProbabilityIsLengthInvariant) {
  const TableModel m("flat", {}, std::vector<TableEntry>{{"a", 0.4}, {"b", 0.6}});
  for (std::size_t n = 1; n <= 8; ++n) {
    const ModelScore s = span_nll(m, Prefix{"b"}, cand(std::string(n, 'a')));
    EXPECT_EQ(s.token_count, n);
    EXPECT_NEAR(s.nll, -std::log(0.4), 1e-12) << n;
  }
}

TEST(SpanNll, AppendingTokensAtTheMeanSurpriseKeepsTheNll) {
  // Probabilities 0.5 and 0.125 average to surprise 2 ln 2, which is -ln 0.25.
  const TableModel m("mix", {{"", {{"a", 0.5}}}, {"a", {{"b", 0.125}}}},
                     std::vector<TableEntry>{{"c", 0.25}});
  const double base = span_nll(m, Prefix{""}, cand("ab")).nll;
  EXPECT_NEAR(base, -std::log(0.25), 1e-12);
  EXPECT_NEAR(span_nll(m, Prefix{""}, cand("abccc")).nll, base, 1e-12);
}

TEST(SpanNll, MatchesCountingOracle) {
  const auto& corpus = testing::toy_corpus();
  const NgramModel m = testing::train(corpus, 2, 0.5, TokenizerKind::character);
  const testing::OracleNgram o(corpus, 2, 0.5, TokenizerKind::character);
  for (const char* span : {"cat ", "sat on ", "the mat"}) {
    const ModelScore s = span_nll(m, Prefix{"the "}, cand(span));
    const testing::OracleScore want = testing::oracle_span_nll(o, "the ", span, false);
    EXPECT_NEAR(s.nll, want.nll, 1e-9 * want.nll);
    EXPECT_EQ(s.token_count, want.tokens);
  }
  const ModelScore eos = span_nll(m, Prefix{"the cat"}, cand("", 0, true));
  EXPECT_EQ(eos.token_count, 1u);
  EXPECT_NEAR(eos.nll, testing::oracle_span_nll(o, "the cat", "", true).nll, 1e-12);
}

TEST(SpanNll, MismatchPropagates) {
  const NgramModel m = testing::train({"ab"}, 2, 1.0, TokenizerKind::character);
  EXPECT_THROW(span_nll(m, Prefix{"a"}, cand("z")), EncodingMismatchError);
}

TEST(Select, SingleModelWinnerIsItsBestSpan) {
  const ScriptedModel m("m", {{'x', -0.5}, {'y', -0.25}, {'z', -1.0}});
  const LanguageModel* models[] = {&m};
  const std::vector<SpanCandidate> pool = {cand("x"), cand("yy"), cand("z")};
  const Selection s = select(pool, models, Prefix{""});
  EXPECT_EQ(s.winner, 1u);
  ASSERT_EQ(s.scores.size(), 3u);
  for (const auto& f : s.scores) EXPECT_EQ(f.fused, f.per_model[0].nll);
}

TEST(Select, TieGoesToTheEarlierCandidate) {
  // X: (0.25, 0.5) and Y: (0.625, 0.125) both fuse to 0.375 exactly.
  const ScriptedModel a("a", {{'x', -0.25}, {'y', -0.625}});
  const ScriptedModel b("b", {{'x', -0.5}, {'y', -0.125}});
  const LanguageModel* models[] = {&a, &b};
  const Selection xy = select(std::vector<SpanCandidate>{cand("x"), cand("y")}, models, Prefix{""});
  EXPECT_EQ(xy.scores[0].fused, 0.375);
  EXPECT_EQ(xy.scores[1].fused, 0.375);
  EXPECT_EQ(xy.winner, 0u);
  EXPECT_EQ(select(std::vector<SpanCandidate>{cand("y"), cand("x")}, models, Prefix{""}).winner, 0u);
}

TEST(Select, FusedValueIgnoresModelOrder) {
  const NgramModel c = testing::train(testing::toy_corpus(), 3, 0.3, TokenizerKind::character);
  const NgramModel w = testing::train(testing::toy_corpus(), 2, 0.7, TokenizerKind::word);
  const NgramModel c5 = testing::train(testing::toy_corpus(), 5, 0.1, TokenizerKind::character);
  const std::vector<SpanCandidate> pool = {cand("cat "), cand("dog sat "), cand("mat ", 0, true)};
  const LanguageModel* forward[] = {&c, &w, &c5};
  const LanguageModel* backward[] = {&c5, &w, &c};
  const Selection f = select(pool, forward, Prefix{"the "});
  const Selection b = select(pool, backward, Prefix{"the "});
  EXPECT_EQ(f.winner, b.winner);
  for (std::size_t i = 0; i < pool.size(); ++i) EXPECT_EQ(f.scores[i].fused, b.scores[i].fused);
}

TEST(Select, ConstantOffsetPerModelKeepsTheWinner) {
  const std::map<char, double> lp = {{'x', -0.7}, {'y', -0.2}, {'z', -1.3}};
  const std::map<char, double> lq = {{'x', -0.1}, {'y', -0.9}, {'z', -0.4}};
  const std::vector<SpanCandidate> pool = {cand("xz"), cand("y"), cand("zx"), cand("x")};
  const ScriptedModel p("p", lp);
  const ScriptedModel q("q", lq);
  const LanguageModel* base[] = {&p, &q};
  const std::size_t want = select(pool, base, Prefix{""}).winner;
  for (double shift : {0.5, 3.0, 40.0}) {
    const ScriptedModel shifted("q", lq, shift);
    const LanguageModel* models[] = {&p, &shifted};
    EXPECT_EQ(select(pool, models, Prefix{""}).winner, want) << shift;
  }
}

TEST(Select, WinnerIsTheBruteForceArgmin) {
  const auto& corpus = testing::toy_corpus();
  const NgramModel a = testing::train(corpus, 3, 0.5, TokenizerKind::character);
  const NgramModel b = testing::train(corpus, 2, 0.5, TokenizerKind::word);
  const testing::OracleNgram oa(corpus, 3, 0.5, TokenizerKind::character);
  const testing::OracleNgram ob(corpus, 2, 0.5, TokenizerKind::word);
  const LanguageModel* models[] = {&a, &b};
  const std::vector<SpanCandidate> pool = {cand("cat "), cand("dog "), cand("bird sat ")};
  for (const char* prefix : {"the ", "a ", "my dog "}) {
    const Selection s = select(pool, models, Prefix{prefix});
    std::size_t best = 0;
    double best_score = 0.0;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      const double f = (testing::oracle_span_nll(oa, prefix, pool[i].span_text, false).nll +
                        testing::oracle_span_nll(ob, prefix, pool[i].span_text, false).nll) / 2.0;
      if (i == 0 || f < best_score) {
        best = i;
        best_score = f;
      }
    }
    EXPECT_EQ(s.winner, best) << prefix;
  }
}

TEST(Select, MismatchIsPenalizedNotDropped) {
  const ScriptedModel a("a", {{'x', -0.5}, {'y', -0.5}});
  const ScriptedModel b("b", {{'x', -0.5}});
  const LanguageModel* models[] = {&a, &b};
  const Selection s = select(std::vector<SpanCandidate>{cand("y"), cand("x")}, models, Prefix{""});
  EXPECT_EQ(s.winner, 1u);
  const ModelScore& pen = s.scores[0].per_model[1];
  EXPECT_TRUE(pen.penalized);
  EXPECT_EQ(pen.token_count, 1u);
  EXPECT_DOUBLE_EQ(pen.nll, -std::log(kMismatchEpsilon));
  EXPECT_DOUBLE_EQ(mismatch_penalty(), -std::log(1e-9));
  EXPECT_EQ(s.scores[0].per_model.size(), 2u);
}

TEST(Select, AllCandidatesUnscorable) {
  const ScriptedModel a("a", {{'x', -0.5}});
  const LanguageModel* models[] = {&a};
  EXPECT_THROW(select(std::vector<SpanCandidate>{cand("q"), cand("r")}, models, Prefix{""}),
               UnscorableError);
  EXPECT_THROW(select(std::vector<SpanCandidate>{}, models, Prefix{""}), EmptyPoolError);
}

TEST(Select, JobsDoNotChangeResults) {
  const NgramModel a = testing::train(testing::toy_corpus(), 3, 0.5, TokenizerKind::character);
  const NgramModel b = testing::train(testing::toy_corpus(), 2, 0.5, TokenizerKind::word);
  const LanguageModel* models[] = {&a, &b};
  const std::vector<SpanCandidate> pool = {cand("cat "), cand("dog "), cand("sat on "),
                                           cand("", 0, true)};
  const Selection one = select(pool, models, Prefix{"the "}, 1);
  const Selection four = select(pool, models, Prefix{"the "}, 4);
  EXPECT_EQ(one.winner, four.winner);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    EXPECT_EQ(one.scores[i].fused, four.scores[i].fused);
    for (std::size_t k = 0; k < 2; ++k) {
      EXPECT_EQ(one.scores[i].per_model[k].nll, four.scores[i].per_model[k].nll);
    }
  }
}

}  // namespace
}  // namespace adafuse
