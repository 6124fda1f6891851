#include "adafuse/conformance.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "adafuse/errors.hpp"

namespace adafuse {

bool ConformanceReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

std::string ConformanceReport::to_text() const {
  std::ostringstream out;
  for (const auto& c : checks) {
    out << (c.passed ? "PASS " : "FAIL ") << c.name;
    if (!c.passed && !c.detail.empty()) out << ": " << c.detail;
    out << '\n';
  }
  return out.str();
}

namespace {

struct Failure {
  std::string what;
};

void expect(bool ok, const std::string& what) {
  if (!ok) throw Failure{what};
}

std::string show(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '\n') out += "\\n";
    else if (c == '"') out += "\\\"";
    else out += c;
  }
  return out + "\"";
}

class Runner {
 public:
  explicit Runner(ConformanceReport& report) : report_(report) {}

  void check(const std::string& name, const std::function<void()>& body) {
    ConformanceCheck c;
    c.name = name;
    try {
      body();
      c.passed = true;
    } catch (const Failure& f) {
      c.detail = f.what;
    } catch (const std::exception& e) {
      c.detail = std::string("unexpected exception: ") + e.what();
    }
    report_.checks.push_back(std::move(c));
  }

 private:
  ConformanceReport& report_;
};

std::vector<std::string> probes(const LanguageModel& m, const ConformanceOptions& o) {
  // Single surfaces only: concatenating word-level surfaces can form text
  // outside the vocabulary, which has no id to send over the wire.
  std::vector<std::string> out = {""};
  const ModelInfo& info = m.info();
  std::size_t added = 0;
  for (TokenId id = 0; id < info.vocab_size && added < 6; ++id) {
    if (id == info.eos_token) continue;
    const TokenId one[] = {id};
    out.push_back(m.decode(one));
    ++added;
  }
  out.insert(out.end(), o.probe_texts.begin(), o.probe_texts.end());
  return out;
}

}  // namespace

ConformanceReport run_conformance(const LanguageModel& subject, const LanguageModel* reference,
                                  const ConformanceOptions& options) {
  ConformanceReport report;
  Runner run(report);
  const ModelInfo& info = subject.info();
  const double tol = options.logprob_tolerance;
  std::vector<std::string> texts;

  run.check("info", [&] {
    expect(!info.model_id.empty(), "empty model_id");
    expect(info.vocab_size > 0, "vocab_size is zero");
    expect(info.eos_token < info.vocab_size, "eos token outside vocabulary");
  });

  run.check("probe_texts", [&] { texts = probes(subject, options); });

  run.check("encode_decode_roundtrip", [&] {
    for (const auto& t : texts) {
      const TokenSequence toks = subject.encode(t);
      const std::string back = subject.decode(toks);
      expect(back == t, "decode(encode(" + show(t) + ")) = " + show(back));
    }
  });

  run.check("eos_decodes_empty", [&] {
    const TokenId eos[] = {info.eos_token};
    expect(subject.decode(eos).empty(), "EOS token decodes to non-empty text");
  });

  run.check("invalid_token_rejected", [&] {
    const TokenId bad[] = {static_cast<TokenId>(info.vocab_size)};
    try {
      subject.decode(bad);
    } catch (const InvalidTokenError&) {
      return;
    }
    throw Failure{"decode of an out-of-vocabulary id did not raise InvalidTokenError"};
  });

  const std::size_t k = std::max<std::size_t>(options.k, 2);
  run.check("topk_sorted_and_sized", [&] {
    for (const auto& t : texts) {
      const TokenSequence ctx = subject.encode(t);
      const TokenDistribution d = subject.topk(ctx, k);
      validate_distribution(d, k, info.vocab_size);
      expect(d.entries.size() == std::min(k, info.vocab_size),
             "topk(" + show(t) + ") returned " + std::to_string(d.entries.size()) + " entries");
    }
  });

  run.check("topk_nested", [&] {
    for (const auto& t : texts) {
      const TokenSequence ctx = subject.encode(t);
      const TokenDistribution big = subject.topk(ctx, k);
      for (std::size_t small_k : {std::size_t{1}, std::size_t{2}}) {
        const TokenDistribution small = subject.topk(ctx, small_k);
        expect(small.entries.size() <= big.entries.size(), "smaller k returned more entries");
        for (std::size_t i = 0; i < small.entries.size(); ++i) {
          expect(small.entries[i] == big.entries[i],
                 "topk(k=" + std::to_string(small_k) + ") is not a prefix of topk(k=" +
                     std::to_string(k) + ") after " + show(t));
        }
      }
    }
  });

  run.check("topk_deterministic", [&] {
    for (const auto& t : texts) {
      const TokenSequence ctx = subject.encode(t);
      expect(subject.topk(ctx, k) == subject.topk(ctx, k), "repeated topk differs after " + show(t));
    }
  });

  if (info.vocab_size <= options.normalization_vocab_limit) {
    run.check("topk_normalized", [&] {
      for (const auto& t : texts) {
        const TokenDistribution d = subject.topk(subject.encode(t), info.vocab_size);
        double mass = 0.0;
        for (const auto& e : d.entries) mass += std::exp(e.logprob);
        expect(std::fabs(mass - 1.0) <= 1e-6,
               "full distribution after " + show(t) + " sums to " + std::to_string(mass));
      }
    });
  }

  run.check("score_matches_greedy_steps", [&] {
    for (const auto& t : texts) {
      const TokenSequence ctx = subject.encode(t);
      TokenSequence path = ctx;
      TokenSequence cont;
      std::vector<double> stepwise;
      for (std::size_t s = 0; s < options.greedy_steps; ++s) {
        const TokenDistribution d = subject.topk(path, 1);
        expect(!d.entries.empty(), "empty top-1");
        cont.push_back(d.entries[0].token);
        stepwise.push_back(d.entries[0].logprob);
        if (d.entries[0].token == info.eos_token) break;
        path.push_back(d.entries[0].token);
      }
      const std::vector<double> scored = subject.score_tokens(ctx, cont);
      expect(scored.size() == cont.size(), "score returned " + std::to_string(scored.size()) +
                                               " logprobs for " + std::to_string(cont.size()) + " tokens");
      for (std::size_t i = 0; i < cont.size(); ++i) {
        expect(std::fabs(scored[i] - stepwise[i]) <= tol,
               "score[" + std::to_string(i) + "] after " + show(t) + " differs from greedy step");
      }
    }
  });

  run.check("score_empty_continuation", [&] {
    const TokenSequence ctx = subject.encode(texts.empty() ? "" : texts.back());
    expect(subject.score_tokens(ctx, {}).empty(), "non-empty logprobs for empty continuation");
  });

  if (reference != nullptr) {
    const ModelInfo& ref = reference->info();
    run.check("reference_info", [&] {
      expect(info.vocab_size == ref.vocab_size, "vocab_size differs");
      expect(info.eos_token == ref.eos_token, "eos token differs");
      expect(info.model_id == ref.model_id, "model_id differs");
    });
    run.check("reference_encode", [&] {
      for (const auto& t : texts) {
        expect(subject.encode(t) == reference->encode(t), "encode(" + show(t) + ") differs");
      }
    });
    run.check("reference_topk", [&] {
      for (const auto& t : texts) {
        const TokenSequence ctx = reference->encode(t);
        const auto a = subject.topk(ctx, k);
        const auto b = reference->topk(ctx, k);
        expect(a.entries.size() == b.entries.size(), "topk size differs after " + show(t));
        for (std::size_t i = 0; i < a.entries.size(); ++i) {
          expect(a.entries[i].token == b.entries[i].token && a.entries[i].surface == b.entries[i].surface &&
                     std::fabs(a.entries[i].logprob - b.entries[i].logprob) <= tol,
                 "topk entry " + std::to_string(i) + " differs after " + show(t));
        }
      }
    });
    run.check("reference_score", [&] {
      for (const auto& t : texts) {
        const TokenSequence ctx = reference->encode(t);
        TokenSequence cont;
        for (TokenId id = 0; id < ref.vocab_size && cont.size() < 3; ++id) cont.push_back(id);
        const auto a = subject.score_tokens(ctx, cont);
        const auto b = reference->score_tokens(ctx, cont);
        expect(a.size() == b.size(), "score length differs after " + show(t));
        for (std::size_t i = 0; i < a.size(); ++i) {
          expect(std::fabs(a[i] - b[i]) <= tol, "score[" + std::to_string(i) + "] differs after " + show(t));
        }
      }
    });
  }
  return report;
}

}  // namespace adafuse
