#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "adafuse/diversity.hpp"
#include "adafuse/engine.hpp"
#include "adafuse/fusion.hpp"
#include "adafuse/ngram_lm.hpp"
#include "adafuse/segmenter.hpp"

namespace {

using namespace adafuse;

// Random sentences over a fixed lexicon; seeded so every run sees the same data.
std::vector<std::string> corpus(std::size_t docs) {
  static const std::vector<std::string> lexicon = {
      "the", "a", "river", "stone", "city", "north", "falls", "quiet", "old", "market",
      "rain", "over", "under", "bright", "lamp", "harbor", "wind", "green", "tower", "road"};
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::size_t> word(0, lexicon.size() - 1);
  std::uniform_int_distribution<std::size_t> length(6, 14);
  std::vector<std::string> out;
  for (std::size_t d = 0; d < docs; ++d) {
    std::string doc;
    const std::size_t n = length(rng);
    for (std::size_t i = 0; i < n; ++i) {
      if (i) doc += ' ';
      doc += lexicon[word(rng)];
    }
    out.push_back(doc + " .");
  }
  return out;
}

struct Models {
  NgramModel chr;
  NgramModel word;
};

const Models& models() {
  static const Models m = [] {
    const auto docs = corpus(400);
    NgramOptions c;
    c.order = 6;
    c.alpha = 0.1;
    c.tokenizer = TokenizerKind::character;
    NgramOptions w;
    w.order = 3;
    w.alpha = 0.1;
    w.tokenizer = TokenizerKind::word;
    return Models{NgramModel::train(docs, c), NgramModel::train(docs, w)};
  }();
  return m;
}

const Prefix kPrefix{"the river over the old "};

void BM_Topk(benchmark::State& state) {
  const NgramModel& m = models().chr;
  const TokenSequence ctx = m.encode(kPrefix.text);
  const auto k = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(m.topk(ctx, k));
}
BENCHMARK(BM_Topk)->Arg(2)->Arg(8)->Arg(32);

void BM_GenWord(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(gen_word(models().chr, kPrefix, "", std::nullopt));
}
BENCHMARK(BM_GenWord);

void BM_ExploreExploit(benchmark::State& state) {
  const auto b = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(explore_exploit(models().chr, kPrefix, "", b));
}
BENCHMARK(BM_ExploreExploit)->Arg(1)->Arg(3)->Arg(6);

void BM_Select(benchmark::State& state) {
  const LanguageModel* ms[] = {&models().chr, &models().word};
  std::vector<SpanCandidate> pool;
  for (const char* text : {"market ", "city under ", "bright lamp over ", "rain "}) {
    SpanCandidate c;
    c.span_text = text;
    pool.push_back(c);
  }
  for (auto _ : state) benchmark::DoNotOptimize(select(pool, ms, kPrefix));
}
BENCHMARK(BM_Select);

void BM_Decode(benchmark::State& state) {
  const LanguageModel* ms[] = {&models().chr, &models().word};
  DecodeConfig cfg;
  cfg.diversity_enabled = state.range(0) != 0;
  cfg.max_new_words = 24;
  for (auto _ : state) benchmark::DoNotOptimize(decode(kPrefix.text, ms, cfg));
}
BENCHMARK(BM_Decode)->Arg(0)->Arg(1);

}  // namespace

BENCHMARK_MAIN();
