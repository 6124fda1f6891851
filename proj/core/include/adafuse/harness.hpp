#pragma once

// Dataset records, metrics and experiment runners.
//
// Records are JSON lines {id, prompt, references}. Evaluation output mirrors
// each input record plus {prediction, metrics, trace_summary} (and {error}
// when decoding failed).

#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adafuse/engine.hpp"
#include "adafuse/lm_core.hpp"

namespace adafuse {

struct EvalItem {
  std::string id;
  std::string prompt;
  std::vector<std::string> references;
};

// One input line: either a parsed item or the reason it was rejected.
struct ItemLine {
  std::size_t line = 0;  // 1-based
  std::optional<EvalItem> item;
  std::string error;
};

// Blank lines are skipped; malformed lines come back with `error` set.
std::vector<ItemLine> read_items(std::istream& in);
std::vector<ItemLine> read_items_file(const std::string& path);

// Lowercase (ASCII), trim, collapse internal whitespace to one space, then
// strip trailing . ! ? , ; : characters.
std::string normalize_answer(std::string_view text);

// 1 iff the normalized prediction is non-empty and equals some normalized reference.
int exact_match(std::string_view prediction, std::span<const std::string> references);

// Corpus BLEU-4 over whitespace tokens: uniform weights, clipped n-gram
// counts, brevity penalty exp(1 - r/c) when c <= r, with r the sum of the
// reference lengths closest to each candidate length (shorter on ties).
// Any zero n-gram precision gives 0. Throws LengthMismatchError.
double bleu(std::span<const std::string> predictions,
            std::span<const std::vector<std::string>> references);
double bleu(std::span<const std::string> predictions, std::span<const std::string> references);

struct TraceSummary {
  std::size_t rounds = 0;
  // words_per_round[i] = rounds that committed i+1 words; rounds committing
  // no words (a bare EOS) are not counted.
  std::vector<std::size_t> words_per_round;
  std::size_t forward_calls = 0;
  std::size_t scoring_calls = 0;
  std::size_t diversified_rounds = 0;
  std::size_t diversified_pool_total = 0;  // sum of pool sizes over diversified rounds
};

TraceSummary summarize(const DecodeTrace& trace, std::size_t max_words_per_round);

// Percentage of word-committing rounds that committed 1..max_words words.
// Shares sum to 100 unless there are no such rounds (then all zero). Rounds
// committing more than max_words words throw std::invalid_argument.
std::vector<double> words_per_round_histogram(std::span<const DecodeTrace> traces,
                                              std::size_t max_words);
// Mean words committed per word-committing round; 0 without such rounds.
double mean_words_per_round(std::span<const DecodeTrace> traces);

struct Exemplar {
  std::string question;
  std::string answer;
};

// JSON lines {question, answer}. Throws FormatError naming the line.
std::vector<Exemplar> read_exemplars(std::istream& in);

// "Q: <question>\nA: <answer>\n\n" per exemplar, then "Q: <prompt>\nA:".
std::string few_shot_prompt(std::span<const Exemplar> exemplars, std::string_view prompt);

struct EvalRecord {
  std::string id;
  std::string prompt;
  std::vector<std::string> references;
  std::string prediction;
  std::map<std::string, double> metrics;
  TraceSummary trace_summary;
  std::optional<std::string> error;
  std::optional<DecodeTrace> trace;  // kept only when requested
};

struct EvalOptions {
  DecodeConfig decode;
  std::vector<Exemplar> exemplars;  // empty: prompts are used verbatim
  bool trim_prediction = true;      // strip outer whitespace before scoring
  bool keep_traces = false;
  std::size_t jobs = 1;             // items decoded concurrently
};

// Decodes every item. Per-item failures land in the record's `error`; an
// invalid decode config throws std::invalid_argument.
std::vector<EvalRecord> evaluate(std::span<const EvalItem> items,
                                 std::span<const LanguageModel* const> models,
                                 const EvalOptions& options);

struct EvalSummary {
  std::size_t items = 0;
  std::size_t errors = 0;
  double exact_match = 0.0;  // mean over scored items
  double bleu = 0.0;
  double mean_words_per_round = 0.0;
  std::vector<double> words_per_round_histogram;
  double mean_rounds = 0.0;
  double mean_forward_calls = 0.0;
  double mean_pool_per_diversified_round = 0.0;
  std::size_t diversified_rounds = 0;
};

EvalSummary summarize(std::span<const EvalRecord> records, std::size_t max_words_per_round);

std::string record_to_json(const EvalRecord& record);
void write_records(std::ostream& out, std::span<const EvalRecord> records);

enum class SweepAxis { tau_delta, branching_factor, mode };
std::string_view to_string(SweepAxis axis);
SweepAxis parse_sweep_axis(std::string_view name);

// Applies one sweep value to a config. Mode values are "adafuse",
// "beam_round" or "fixed_length[:L]". Throws std::invalid_argument.
DecodeConfig apply_sweep_value(DecodeConfig base, SweepAxis axis, std::string_view value);

struct SweepCell {
  std::string value;
  DecodeConfig config;
  std::vector<EvalRecord> records;
  EvalSummary summary;
};

struct SweepReport {
  SweepAxis axis = SweepAxis::tau_delta;
  std::vector<SweepCell> cells;
};

// One evaluation per value, all over the same items and providers.
SweepReport run_sweep(std::span<const EvalItem> items,
                      std::span<const LanguageModel* const> models, const EvalOptions& base,
                      SweepAxis axis, std::span<const std::string> values);

std::string sweep_report_json(const SweepReport& report, int indent = 2);
// One row per cell; columns are stable and documented in the README.
std::string sweep_report_csv(const SweepReport& report);

}  // namespace adafuse
