#include "adafuse/harness.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>

#include "adafuse/errors.hpp"
#include "adafuse/text.hpp"
#include "json_codec.hpp"
#include "parallel.hpp"

namespace adafuse {

using nlohmann::json;

std::vector<ItemLine> read_items(std::istream& in) {
  std::vector<ItemLine> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::is_all_space(line)) continue;
    ItemLine parsed;
    parsed.line = number;
    try {
      const json j = json::parse(line);
      if (!j.is_object()) throw FormatError("record is not an object");
      EvalItem item;
      if (!j.contains("id")) throw FormatError("missing field 'id'");
      if (j.at("id").is_string()) {
        item.id = j.at("id").get<std::string>();
      } else if (j.at("id").is_number_integer()) {
        item.id = std::to_string(j.at("id").get<long long>());
      } else {
        throw FormatError("field 'id' must be a string or integer");
      }
      if (!j.contains("prompt") || !j.at("prompt").is_string()) {
        throw FormatError("field 'prompt' must be a string");
      }
      item.prompt = j.at("prompt").get<std::string>();
      if (j.contains("references")) {
        const json& refs = j.at("references");
        if (!refs.is_array()) throw FormatError("field 'references' must be an array");
        for (const auto& r : refs) {
          if (!r.is_string()) throw FormatError("field 'references' must hold strings");
          item.references.push_back(r.get<std::string>());
        }
      }
      parsed.item = std::move(item);
    } catch (const json::exception& e) {
      parsed.error = "line " + std::to_string(number) + ": " + e.what();
    } catch (const FormatError& e) {
      parsed.error = "line " + std::to_string(number) + ": " + e.what();
    }
    out.push_back(std::move(parsed));
  }
  return out;
}

std::vector<ItemLine> read_items_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open records file '" + path + "'");
  return read_items(in);
}

std::string normalize_answer(std::string_view s) {
  std::string lowered(s);
  for (char& c : lowered) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  std::string out = text::collapse_spaces(lowered);
  while (!out.empty() && std::string_view(".!?,;:").find(out.back()) != std::string_view::npos) {
    out.pop_back();
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

int exact_match(std::string_view prediction, std::span<const std::string> references) {
  const std::string p = normalize_answer(prediction);
  if (p.empty()) return 0;
  for (const auto& r : references) {
    if (normalize_answer(r) == p) return 1;
  }
  return 0;
}

namespace {

using Ngrams = std::map<std::vector<std::string>, std::size_t>;

Ngrams ngram_counts(const std::vector<std::string>& tokens, std::size_t n) {
  Ngrams out;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++out[std::vector<std::string>(tokens.begin() + i, tokens.begin() + i + n)];
  }
  return out;
}

}  // namespace

double bleu(std::span<const std::string> predictions,
            std::span<const std::vector<std::string>> references) {
  if (predictions.size() != references.size()) {
    throw LengthMismatchError("bleu: " + std::to_string(predictions.size()) + " predictions vs " +
                              std::to_string(references.size()) + " reference sets");
  }
  constexpr std::size_t kMaxN = 4;
  std::array<std::size_t, kMaxN> matched{};
  std::array<std::size_t, kMaxN> total{};
  std::size_t cand_len = 0;
  std::size_t ref_len = 0;

  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto cand = text::split_words(predictions[i]);
    std::vector<std::vector<std::string>> refs;
    for (const auto& r : references[i]) refs.push_back(text::split_words(r));
    if (refs.empty()) throw LengthMismatchError("bleu: item " + std::to_string(i) + " has no references");

    cand_len += cand.size();
    std::size_t best = refs.front().size();
    for (const auto& r : refs) {
      const auto d = [&](std::size_t len) {
        return len > cand.size() ? len - cand.size() : cand.size() - len;
      };
      if (d(r.size()) < d(best) || (d(r.size()) == d(best) && r.size() < best)) best = r.size();
    }
    ref_len += best;

    for (std::size_t n = 1; n <= kMaxN; ++n) {
      const Ngrams c = ngram_counts(cand, n);
      Ngrams max_ref;
      for (const auto& r : refs) {
        for (const auto& [g, count] : ngram_counts(r, n)) {
          max_ref[g] = std::max(max_ref[g], count);
        }
      }
      for (const auto& [g, count] : c) {
        total[n - 1] += count;
        const auto it = max_ref.find(g);
        if (it != max_ref.end()) matched[n - 1] += std::min(count, it->second);
      }
    }
  }

  double log_sum = 0.0;
  for (std::size_t n = 0; n < kMaxN; ++n) {
    if (matched[n] == 0 || total[n] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(matched[n]) / static_cast<double>(total[n]));
  }
  const double bp = cand_len > ref_len
                        ? 1.0
                        : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len));
  return bp * std::exp(log_sum / static_cast<double>(kMaxN));
}

double bleu(std::span<const std::string> predictions, std::span<const std::string> references) {
  std::vector<std::vector<std::string>> wrapped;
  wrapped.reserve(references.size());
  for (const auto& r : references) wrapped.push_back({r});
  return bleu(predictions, std::span<const std::vector<std::string>>(wrapped));
}

TraceSummary summarize(const DecodeTrace& trace, std::size_t max_words_per_round) {
  TraceSummary s;
  s.rounds = trace.rounds.size();
  s.words_per_round.assign(max_words_per_round, 0);
  s.forward_calls = trace.totals.provider_forward_calls;
  s.scoring_calls = trace.totals.scoring_calls;
  for (const auto& r : trace.rounds) {
    if (r.words_committed > 0) {
      if (r.words_committed > max_words_per_round) {
        throw std::invalid_argument("round " + std::to_string(r.index) + " committed " +
                                    std::to_string(r.words_committed) + " words (max " +
                                    std::to_string(max_words_per_round) + ")");
      }
      ++s.words_per_round[r.words_committed - 1];
    }
    if (r.diversified) {
      ++s.diversified_rounds;
      s.diversified_pool_total += r.pool.size();
    }
  }
  return s;
}

namespace {

std::vector<double> shares(const std::vector<std::size_t>& counts) {
  std::size_t total = 0;
  for (auto c : counts) total += c;
  std::vector<double> out(counts.size(), 0.0);
  if (total == 0) return out;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    out[i] = 100.0 * static_cast<double>(counts[i]) / static_cast<double>(total);
  }
  return out;
}

double mean_from_counts(const std::vector<std::size_t>& counts) {
  std::size_t rounds = 0;
  std::size_t words = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    rounds += counts[i];
    words += counts[i] * (i + 1);
  }
  return rounds == 0 ? 0.0 : static_cast<double>(words) / static_cast<double>(rounds);
}

}  // namespace

std::vector<double> words_per_round_histogram(std::span<const DecodeTrace> traces,
                                              std::size_t max_words) {
  std::vector<std::size_t> counts(max_words, 0);
  for (const auto& t : traces) {
    const TraceSummary s = summarize(t, max_words);
    for (std::size_t i = 0; i < max_words; ++i) counts[i] += s.words_per_round[i];
  }
  return shares(counts);
}

double mean_words_per_round(std::span<const DecodeTrace> traces) {
  std::size_t rounds = 0;
  std::size_t words = 0;
  for (const auto& t : traces) {
    for (const auto& r : t.rounds) {
      if (r.words_committed == 0) continue;
      ++rounds;
      words += r.words_committed;
    }
  }
  return rounds == 0 ? 0.0 : static_cast<double>(words) / static_cast<double>(rounds);
}

std::vector<Exemplar> read_exemplars(std::istream& in) {
  std::vector<Exemplar> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (text::is_all_space(line)) continue;
    try {
      const json j = json::parse(line);
      out.push_back({j.at("question").get<std::string>(), j.at("answer").get<std::string>()});
    } catch (const json::exception& e) {
      throw FormatError("exemplars line " + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

std::string few_shot_prompt(std::span<const Exemplar> exemplars, std::string_view prompt) {
  std::string out;
  for (const auto& e : exemplars) {
    out += "Q: " + e.question + "\nA: " + e.answer + "\n\n";
  }
  out += "Q: ";
  out += prompt;
  out += "\nA:";
  return out;
}

namespace {

std::size_t histogram_width(const DecodeConfig& c) {
  return std::max(c.max_words_per_round, c.mode == DecodeMode::fixed_length ? c.fixed_length : 1);
}

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace

std::vector<EvalRecord> evaluate(std::span<const EvalItem> items,
                                 std::span<const LanguageModel* const> models,
                                 const EvalOptions& options) {
  options.decode.validate();
  std::vector<EvalRecord> records(items.size());
  detail::parallel_for(items.size(), options.jobs, [&](std::size_t i) {
    const EvalItem& item = items[i];
    EvalRecord& rec = records[i];
    rec.id = item.id;
    rec.prompt = item.prompt;
    rec.references = item.references;
    const std::string prompt =
        options.exemplars.empty() ? item.prompt : few_shot_prompt(options.exemplars, item.prompt);
    try {
      DecodeResult result = decode(prompt, models, options.decode);
      rec.prediction = options.trim_prediction ? trim(result.output) : result.output;
      rec.trace_summary = summarize(result.trace, histogram_width(options.decode));
      if (result.error) {
        rec.error = "round " + std::to_string(result.error->round) + ": " + result.error->message;
      }
      if (options.keep_traces) rec.trace = std::move(result.trace);
    } catch (const std::exception& e) {
      rec.error = e.what();
    }
    if (!rec.references.empty()) {
      rec.metrics["exact_match"] = exact_match(rec.prediction, rec.references);
    }
  });
  return records;
}

EvalSummary summarize(std::span<const EvalRecord> records, std::size_t max_words_per_round) {
  EvalSummary s;
  s.items = records.size();
  std::vector<std::size_t> counts(max_words_per_round, 0);
  std::vector<std::string> preds;
  std::vector<std::vector<std::string>> refs;
  double em = 0.0;
  std::size_t rounds = 0;
  std::size_t forward = 0;
  std::size_t pool_total = 0;
  for (const auto& r : records) {
    if (r.error) ++s.errors;
    if (!r.references.empty()) {
      em += exact_match(r.prediction, r.references);
      preds.push_back(r.prediction);
      refs.push_back(r.references);
    }
    const auto& wpr = r.trace_summary.words_per_round;
    for (std::size_t i = 0; i < std::min(wpr.size(), counts.size()); ++i) counts[i] += wpr[i];
    rounds += r.trace_summary.rounds;
    forward += r.trace_summary.forward_calls;
    s.diversified_rounds += r.trace_summary.diversified_rounds;
    pool_total += r.trace_summary.diversified_pool_total;
  }
  if (!preds.empty()) {
    s.exact_match = em / static_cast<double>(preds.size());
    s.bleu = bleu(preds, std::span<const std::vector<std::string>>(refs));
  }
  s.words_per_round_histogram = shares(counts);
  s.mean_words_per_round = mean_from_counts(counts);
  if (!records.empty()) {
    s.mean_rounds = static_cast<double>(rounds) / static_cast<double>(records.size());
    s.mean_forward_calls = static_cast<double>(forward) / static_cast<double>(records.size());
  }
  if (s.diversified_rounds > 0) {
    s.mean_pool_per_diversified_round =
        static_cast<double>(pool_total) / static_cast<double>(s.diversified_rounds);
  }
  return s;
}

namespace {

json record_json(const EvalRecord& r) {
  json j = {{"id", r.id},
            {"prompt", r.prompt},
            {"references", r.references},
            {"prediction", r.prediction},
            {"metrics", r.metrics},
            {"trace_summary",
             {{"rounds", r.trace_summary.rounds},
              {"words_per_round", r.trace_summary.words_per_round},
              {"forward_calls", r.trace_summary.forward_calls},
              {"scoring_calls", r.trace_summary.scoring_calls}}}};
  if (r.error) j["error"] = *r.error;
  return j;
}

json summary_json(const EvalSummary& s) {
  return {{"items", s.items},
          {"errors", s.errors},
          {"exact_match", s.exact_match},
          {"bleu", s.bleu},
          {"mean_words_per_round", s.mean_words_per_round},
          {"words_per_round_histogram", s.words_per_round_histogram},
          {"mean_rounds", s.mean_rounds},
          {"mean_forward_calls", s.mean_forward_calls},
          {"diversified_rounds", s.diversified_rounds},
          {"mean_pool_per_diversified_round", s.mean_pool_per_diversified_round}};
}

}  // namespace

std::string record_to_json(const EvalRecord& record) { return record_json(record).dump(); }

void write_records(std::ostream& out, std::span<const EvalRecord> records) {
  for (const auto& r : records) out << record_to_json(r) << '\n';
}

std::string_view to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::tau_delta: return "tau_delta";
    case SweepAxis::branching_factor: return "branching_factor";
    case SweepAxis::mode: return "mode";
  }
  return "unknown";
}

SweepAxis parse_sweep_axis(std::string_view name) {
  if (name == "tau_delta" || name == "tau") return SweepAxis::tau_delta;
  if (name == "branching_factor" || name == "B") return SweepAxis::branching_factor;
  if (name == "mode") return SweepAxis::mode;
  throw std::invalid_argument("unknown sweep axis '" + std::string(name) + "'");
}

DecodeConfig apply_sweep_value(DecodeConfig base, SweepAxis axis, std::string_view value) {
  const std::string v(value);
  auto number = [&](auto parse) {
    std::size_t used = 0;
    try {
      auto x = parse(v, &used);
      if (used == v.size()) return x;
    } catch (const std::exception&) {
    }
    throw std::invalid_argument("bad " + std::string(to_string(axis)) + " value '" + v + "'");
  };
  switch (axis) {
    case SweepAxis::tau_delta:
      base.tau_delta = number([](const std::string& s, std::size_t* u) { return std::stod(s, u); });
      break;
    case SweepAxis::branching_factor:
      base.branching_factor =
          number([](const std::string& s, std::size_t* u) { return std::stoul(s, u); });
      break;
    case SweepAxis::mode: {
      const auto colon = v.find(':');
      base.mode = parse_decode_mode(v.substr(0, colon));
      if (colon != std::string::npos) {
        if (base.mode != DecodeMode::fixed_length) {
          throw std::invalid_argument("only fixed_length takes a parameter: '" + v + "'");
        }
        const std::string len = v.substr(colon + 1);
        std::size_t used = 0;
        unsigned long n = 0;
        try {
          n = std::stoul(len, &used);
        } catch (const std::exception&) {
          used = 0;
        }
        if (len.empty() || used != len.size()) throw std::invalid_argument("bad mode value '" + v + "'");
        base.fixed_length = n;
      }
      break;
    }
  }
  base.validate();
  return base;
}

SweepReport run_sweep(std::span<const EvalItem> items,
                      std::span<const LanguageModel* const> models, const EvalOptions& base,
                      SweepAxis axis, std::span<const std::string> values) {
  if (values.empty()) throw std::invalid_argument("run_sweep: no values");
  SweepReport report;
  report.axis = axis;
  std::vector<DecodeConfig> configs;
  for (const auto& v : values) configs.push_back(apply_sweep_value(base.decode, axis, v));
  for (std::size_t i = 0; i < values.size(); ++i) {
    SweepCell cell;
    cell.value = values[i];
    cell.config = configs[i];
    EvalOptions opts = base;
    opts.decode = configs[i];
    cell.records = evaluate(items, models, opts);
    cell.summary = summarize(cell.records, histogram_width(configs[i]));
    report.cells.push_back(std::move(cell));
  }
  return report;
}

std::string sweep_report_json(const SweepReport& report, int indent) {
  json cells = json::array();
  for (const auto& c : report.cells) {
    json errors = json::array();
    for (const auto& r : c.records) {
      if (r.error) errors.push_back({{"id", r.id}, {"error", *r.error}});
    }
    cells.push_back({{"value", c.value},
                     {"config", detail::config_json(c.config)},
                     {"summary", summary_json(c.summary)},
                     {"item_errors", errors}});
  }
  return json({{"axis", std::string(to_string(report.axis))},
               {"bleu_variant", "corpus BLEU-4, whitespace tokens, brevity penalty"},
               {"cells", cells}})
             .dump(indent) +
         "\n";
}

std::string sweep_report_csv(const SweepReport& report) {
  std::size_t max_m = 0;
  for (const auto& c : report.cells) max_m = std::max(max_m, c.summary.words_per_round_histogram.size());
  std::ostringstream out;
  out << std::setprecision(17);
  out << "axis,value,items,errors,exact_match,bleu,mean_words_per_round";
  for (std::size_t i = 1; i <= max_m; ++i) out << ",wpr_" << i;
  out << ",mean_rounds,mean_forward_calls,diversified_rounds,mean_pool_per_diversified_round\n";
  for (const auto& c : report.cells) {
    const EvalSummary& s = c.summary;
    out << to_string(report.axis) << ',' << c.value << ',' << s.items << ',' << s.errors << ','
        << s.exact_match << ',' << s.bleu << ',' << s.mean_words_per_round;
    for (std::size_t i = 0; i < max_m; ++i) {
      out << ',' << (i < s.words_per_round_histogram.size() ? s.words_per_round_histogram[i] : 0.0);
    }
    out << ',' << s.mean_rounds << ',' << s.mean_forward_calls << ',' << s.diversified_rounds << ','
        << s.mean_pool_per_diversified_round << '\n';
  }
  return out.str();
}

}  // namespace adafuse
