#include "fixtures.hpp"

#include <algorithm>
#include <set>

#include "adafuse/text.hpp"

namespace adafuse::testing {

std::size_t pick(Rng& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

NgramModel train(const std::vector<std::string>& corpus, int order, double alpha,
                 TokenizerKind kind, const std::string& model_id) {
  NgramOptions o;
  o.order = order;
  o.alpha = alpha;
  o.tokenizer = kind;
  o.model_id = model_id;
  return NgramModel::train(corpus, o);
}

const std::vector<std::string>& toy_corpus() {
  static const std::vector<std::string> docs = {
      "the cat sat on the mat",
      "the dog sat on the rug",
      "a cat ran to the door",
      "the dog ran to the park",
      "a bird sat on the fence",
      "the cat ate the fish",
      "the dog ate a bone",
      "a bird ate the seed",
      "the sun is warm today",
      "the rain is cold today",
      "my cat is on the mat",
      "my dog is in the park",
      "she said the cat is warm",
      "he said the dog is cold",
      "we saw a bird on the door",
      "they saw the cat on the fence",
  };
  return docs;
}

std::vector<std::string> chain_corpus(std::uint64_t seed, std::size_t documents, std::size_t words,
                                      std::size_t max_fanout) {
  Rng rng(seed);
  static const std::vector<std::string> lexicon = {
      "amber", "brook", "cedar", "delta", "ember", "fjord", "grove", "heath",
      "inlet", "jetty", "knoll", "ledge", "marsh", "north", "oasis", "plain",
      "quay",  "ridge", "shoal", "tarn",  "upland", "vale",  "weald", "yard"};
  // Each word gets a successor list; repeated entries skew the distribution.
  std::vector<std::vector<std::size_t>> next(lexicon.size());
  for (std::size_t i = 0; i < lexicon.size(); ++i) {
    const std::size_t fanout = 1 + pick(rng, max_fanout);
    for (std::size_t f = 0; f < fanout; ++f) {
      const std::size_t target = pick(rng, lexicon.size());
      const std::size_t weight = 1 + pick(rng, f == 0 ? 6 : 2);
      for (std::size_t w = 0; w < weight; ++w) next[i].push_back(target);
    }
  }
  std::vector<std::string> docs;
  for (std::size_t d = 0; d < documents; ++d) {
    std::size_t cur = pick(rng, lexicon.size());
    std::string doc = lexicon[cur];
    for (std::size_t w = 1; w < words; ++w) {
      cur = pick_from(rng, next[cur]);
      doc += ' ' + lexicon[cur];
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::vector<std::string> document_prompts(const std::vector<std::string>& docs, std::size_t n,
                                          std::size_t count) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < count && i < docs.size(); ++i) {
    const auto words = text::split_words(docs[i]);
    std::string p;
    for (std::size_t w = 0; w < n && w < words.size(); ++w) p += words[w] + " ";
    out.push_back(std::move(p));
  }
  return out;
}

namespace {

const std::vector<std::string> kFirst = {"kelly", "terrence", "marisol", "dana",  "ogden", "priya",
                                         "lucas", "wen",      "fatima",  "bruno", "ines",  "hale"};
const std::vector<std::string> kLast = {"reno", "okafor", "lindqvist", "marsh", "tanaka", "quill",
                                        "abebe", "castro", "novak",    "brandt", "sato",  "vale"};
const std::vector<std::string> kFood = {"plums", "rice", "lentils", "kelp", "figs", "barley", "squid", "dates"};
const std::vector<std::string> kPlace = {"oslo", "lagos", "lima", "hanoi", "quito", "perth", "tunis", "riga"};
const std::vector<std::string> kSyllable = {"zor", "bla", "kin", "tev", "mu", "rad", "pho", "qui",
                                            "lan", "dex", "vor", "eth", "ska", "nim", "uru", "gal"};

struct Fact {
  std::string question;
  std::string answer;
  std::string wrong;
};

std::string entity(Rng& rng, std::set<std::string>& used) {
  for (;;) {
    std::string e;
    const std::size_t n = 2 + pick(rng, 2);
    for (std::size_t i = 0; i < n; ++i) e += pick_from(rng, kSyllable);
    if (used.insert(e).second) return e;
  }
}

std::string other(Rng& rng, const std::vector<std::string>& pool, const std::string& not_this) {
  for (;;) {
    const std::string& s = pick_from(rng, pool);
    if (s != not_this) return s;
  }
}

Fact make_fact(Rng& rng, std::set<std::string>& used) {
  const std::string e = entity(rng, used);
  Fact f;
  switch (pick(rng, 3)) {
    case 0: {
      const std::string first = pick_from(rng, kFirst);
      const std::string last = pick_from(rng, kLast);
      f.question = "who owns " + e + " ?";
      f.answer = first + " " + last;
      f.wrong = first + " " + other(rng, kLast, last);
      break;
    }
    case 1: {
      const std::string place = pick_from(rng, kPlace);
      f.question = "where is " + e + " ?";
      f.answer = place;
      f.wrong = other(rng, kPlace, place);
      break;
    }
    default: {
      const std::string a = pick_from(rng, kFood);
      const std::string b = other(rng, kFood, a);
      f.question = "what does " + e + " eat ?";
      f.answer = a + " and " + b;
      f.wrong = a + " and " + other(rng, kFood, b);
      break;
    }
  }
  return f;
}

void add_fact(std::vector<std::string>& corpus, const Fact& f, bool conflicting) {
  corpus.push_back(f.question + " " + f.answer);
  if (conflicting) {
    corpus.push_back(f.question + " " + f.answer);
    corpus.push_back(f.question + " " + f.wrong);
  }
}

}  // namespace

QaFixture synthetic_qa(std::uint64_t seed, const QaOptions& options) {
  Rng rng(seed);
  std::set<std::string> used;
  std::vector<Fact> half_a, half_b, shared;
  for (std::size_t i = 0; i < options.facts_per_half; ++i) half_a.push_back(make_fact(rng, used));
  for (std::size_t i = 0; i < options.facts_per_half; ++i) half_b.push_back(make_fact(rng, used));
  for (std::size_t i = 0; i < options.shared_facts; ++i) shared.push_back(make_fact(rng, used));

  std::vector<std::string> lexicon = {"and"};
  for (const auto* pool : {&kFirst, &kLast, &kFood, &kPlace}) {
    lexicon.insert(lexicon.end(), pool->begin(), pool->end());
  }
  lexicon.insert(lexicon.end(), used.begin(), used.end());

  QaFixture fx;
  for (const auto& f : half_a) add_fact(fx.corpus_a, f, options.conflicting);
  for (const auto& f : half_b) add_fact(fx.corpus_b, f, options.conflicting);
  for (const auto& f : shared) {
    add_fact(fx.corpus_a, f, options.conflicting);
    add_fact(fx.corpus_b, f, options.conflicting);
  }
  fx.corpus_a.insert(fx.corpus_a.end(), lexicon.begin(), lexicon.end());
  fx.corpus_b.insert(fx.corpus_b.end(), lexicon.begin(), lexicon.end());

  std::size_t id = 0;
  auto add_item = [&](const Fact& f, bool disagreement) {
    EvalItem item;
    item.id = "q" + std::to_string(id++);
    item.prompt = f.question + " ";
    item.references = {f.answer};
    fx.eval.push_back(std::move(item));
    fx.disagreement.push_back(disagreement);
  };
  // Interleave the halves so any prefix of the eval set is balanced.
  for (std::size_t i = 0; i < options.facts_per_half; ++i) {
    add_item(half_a[i], true);
    add_item(half_b[i], true);
  }
  for (const auto& f : shared) add_item(f, false);
  return fx;
}

std::vector<std::string> shared_first_token_corpus() {
  std::vector<std::string> docs;
  for (const char* verb : {"sat", "ran", "hid"}) {
    for (int i = 0; i < 3; ++i) docs.push_back(std::string("> cat ") + verb);
  }
  for (int i = 0; i < 2; ++i) docs.push_back("> dog ran");
  for (int i = 0; i < 2; ++i) docs.push_back("> bat hid");
  return docs;
}

std::vector<std::string> tiny_char_corpus(std::uint64_t seed) {
  Rng rng(seed);
  static const std::vector<std::string> letters = {"a", "b", "c", "d", "e"};
  std::vector<std::string> docs;
  for (int d = 0; d < 30; ++d) {
    std::string doc;
    const std::size_t nwords = 2 + pick(rng, 4);
    for (std::size_t w = 0; w < nwords; ++w) {
      if (w > 0) doc += ' ';
      const std::size_t len = 1 + pick(rng, 4);
      for (std::size_t i = 0; i < len; ++i) doc += pick_from(rng, letters);
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::vector<std::string> tiny_word_corpus(std::uint64_t seed) {
  Rng rng(seed);
  static const std::vector<std::string> words = {"red", "blue", "cat", "dog", "runs",
                                                 "sits", "the",  "a",   "big", "old"};
  std::vector<std::string> docs;
  for (int d = 0; d < 40; ++d) {
    std::string doc;
    const std::size_t n = 2 + pick(rng, 5);
    for (std::size_t w = 0; w < n; ++w) {
      if (w > 0) doc += ' ';
      doc += pick_from(rng, words);
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::vector<std::string> random_prefixes(Rng& rng, const std::vector<std::string>& corpus,
                                         TokenizerKind kind, std::size_t count,
                                         std::size_t max_symbols) {
  std::set<std::string> seen;
  std::vector<std::string> symbols;
  for (const auto& doc : corpus) {
    for (auto& s : NgramModel::symbols(doc, kind)) {
      if (seen.insert(s).second) symbols.push_back(s);
    }
  }
  std::sort(symbols.begin(), symbols.end());
  std::vector<std::string> out;
  for (std::size_t i = 0; i < count; ++i) {
    std::string p;
    const std::size_t n = pick(rng, max_symbols + 1);
    for (std::size_t j = 0; j < n; ++j) p += pick_from(rng, symbols);
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<std::string> word_prompts(Rng& rng, const std::vector<std::string>& corpus,
                                      std::size_t count, std::size_t max_words) {
  std::set<std::string> seen;
  for (const auto& doc : corpus) {
    for (auto& w : text::split_words(doc)) seen.insert(std::move(w));
  }
  const std::vector<std::string> words(seen.begin(), seen.end());
  std::vector<std::string> out;
  for (std::size_t i = 0; i < count; ++i) {
    std::string p;
    const std::size_t n = 1 + pick(rng, max_words);
    for (std::size_t j = 0; j < n; ++j) p += (j > 0 ? " " : "") + pick_from(rng, words);
    if (i % 2 == 0) p += ' ';
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace adafuse::testing
