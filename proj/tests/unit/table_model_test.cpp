#include "adafuse/table_model.hpp"

#include <gtest/gtest.h>

#include "adafuse/errors.hpp"
#include "adafuse/segmenter.hpp"

namespace adafuse {
namespace {

TableModel cat_fixture() {
  return TableModel::deterministic(
      "det", {{"the ", "c"}, {"the c", "a"}, {"the ca", "t"}, {"the cat", " "}});
}

TEST(TableModel, DeterministicTransitionsDriveWordGeneration) {
  const TableModel m = cat_fixture();
  const WordProposal w = gen_word(m, Prefix{"the "}, "", std::nullopt);
  EXPECT_EQ(w.word_text, "cat ");
  EXPECT_EQ(w.terminal, WordTerminal::boundary);
}

TEST(TableModel, MappedTokenHasLogprobZeroOthersFloor) {
  const TableModel m = cat_fixture();
  const auto d = m.topk(m.encode("the c"), 3);
  EXPECT_EQ(d.entries[0].surface, "a");
  EXPECT_DOUBLE_EQ(d.entries[0].logprob, 0.0);
  EXPECT_DOUBLE_EQ(d.entries[1].logprob, TableModel::kFloorLogprob);
  EXPECT_LT(d.entries[1].token, d.entries[2].token);
}

TEST(TableModel, UnmappedContextIsAnError) {
  const TableModel m = cat_fixture();
  EXPECT_THROW(m.topk(m.encode("cat"), 2), UnreachableContextError);
  EXPECT_THROW(gen_word(m, Prefix{"the cat "}, "", std::nullopt), UnreachableContextError);
}

TEST(TableModel, FallbackCoversUnmappedContexts) {
  const TableModel m = TableModel::deterministic("det", {{"a", "b"}}, std::string("a"));
  // Keys are whole context texts, so "ba" does not match "a".
  EXPECT_EQ(m.topk(m.encode("a"), 2).entries[0].surface, "b");
  EXPECT_EQ(m.topk(m.encode("ba"), 2).entries[0].surface, "a");
}

TEST(TableModel, RepeatedQueriesAreIdentical) {
  const TableModel m = cat_fixture();
  const TokenSequence ctx = m.encode("the ca");
  EXPECT_EQ(m.topk(ctx, 4), m.topk(ctx, 4));
  const TokenSequence tail = m.encode("t ");
  EXPECT_EQ(m.score_tokens(ctx, tail), m.score_tokens(ctx, tail));
}

TEST(TableModel, LongestMatchEncoding) {
  const TableModel m("multi", {}, std::vector<TableEntry>{{"ab", 0.5}, {"a", 0.25}, {"b", 0.25}});
  EXPECT_EQ(m.encode("abab").size(), 2u);
  EXPECT_EQ(m.encode("aab").size(), 2u);
  EXPECT_EQ(m.decode(m.encode("aab")), "aab");
  EXPECT_THROW(m.encode("abc"), InvalidTokenError);
}

TEST(TableModel, RejectsInvalidEntries) {
  EXPECT_THROW(TableModel("bad", {}, std::vector<TableEntry>{{"a", 1.5}}), std::invalid_argument);
  EXPECT_THROW(TableModel("bad", {}, std::vector<TableEntry>{{"", 0.5}}), std::invalid_argument);
  EXPECT_THROW(cat_fixture().token_of("zz"), std::invalid_argument);
}

}  // namespace
}  // namespace adafuse
