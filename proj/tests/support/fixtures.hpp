#pragma once

// Deterministic corpora, prompts and models shared by the test binaries.
// Every random choice draws raw std::mt19937_64 output reduced modulo the
// range, so fixtures are identical on every platform and standard library.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "adafuse/harness.hpp"
#include "adafuse/ngram_lm.hpp"

namespace adafuse::testing {

using Rng = std::mt19937_64;

std::size_t pick(Rng& rng, std::size_t n);

template <typename T>
const T& pick_from(Rng& rng, const std::vector<T>& items) {
  return items[pick(rng, items.size())];
}

NgramModel train(const std::vector<std::string>& corpus, int order, double alpha,
                 TokenizerKind kind, const std::string& model_id = "");

// Short English sentences, single-spaced, lowercase ASCII.
const std::vector<std::string>& toy_corpus();

// Documents generated by a first-order word chain where each word has 1 to
// `max_fanout` successors with uneven weights, so start-of-word margins spread
// over [0, 1]. With max_fanout 1 every continuation is deterministic. Every
// document has `words` words.
std::vector<std::string> chain_corpus(std::uint64_t seed, std::size_t documents, std::size_t words,
                                      std::size_t max_fanout = 3);

// The first `n` words of each document, used as prompts.
std::vector<std::string> document_prompts(const std::vector<std::string>& docs, std::size_t n,
                                          std::size_t count);

// Synthetic closed-book QA: facts "<question> <answer>" split between two
// experts. Each expert also sees the shared facts and a one-word-per-document
// lexicon of every answer word and entity, so both experts share one
// vocabulary and differ only in the facts they have seen.
struct QaOptions {
  std::size_t facts_per_half = 12;
  std::size_t shared_facts = 4;
  // Add, for every fact, a minority document pairing the entity with a wrong
  // answer that shares the first answer word. Lowers answer-word margins.
  bool conflicting = false;
};

struct QaFixture {
  std::vector<std::string> corpus_a;
  std::vector<std::string> corpus_b;
  std::vector<EvalItem> eval;
  std::vector<bool> disagreement;  // the fact is known to exactly one expert
};

QaFixture synthetic_qa(std::uint64_t seed, const QaOptions& options = {});

// Corpus where one first word dominates a prompt and its continuation is
// deterministic, so token-level beams all share that first word.
std::vector<std::string> shared_first_token_corpus();

// Small-vocabulary corpora for exhaustive search (|V| <= 20).
std::vector<std::string> tiny_char_corpus(std::uint64_t seed);
std::vector<std::string> tiny_word_corpus(std::uint64_t seed);

// Random runs of 1..max_words corpus words joined by single spaces, every
// other one with a trailing space. Representable by any model of the corpus.
std::vector<std::string> word_prompts(Rng& rng, const std::vector<std::string>& corpus,
                                      std::size_t count, std::size_t max_words);

// Random texts built from corpus symbols of the given tokenizer kind.
std::vector<std::string> random_prefixes(Rng& rng, const std::vector<std::string>& corpus,
                                         TokenizerKind kind, std::size_t count,
                                         std::size_t max_symbols);

}  // namespace adafuse::testing
