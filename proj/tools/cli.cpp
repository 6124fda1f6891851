#include "cli.hpp"

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <memory>
#include <optional>
#include <sstream>

#include "adafuse/conformance.hpp"
#include "adafuse/engine.hpp"
#include "adafuse/errors.hpp"
#include "adafuse/harness.hpp"
#include "adafuse/ngram_lm.hpp"
#include "adafuse/remote_lm.hpp"
#include "adafuse/stub_server.hpp"
#include "adafuse/trace_io.hpp"

namespace adafuse::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Bad flags, unreadable or malformed configuration, missing input files.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ModelSpec {
  std::string kind;  // ngram | remote
  std::string locator;
  std::optional<std::string> tokenizer;
};

struct RunConfig {
  std::vector<ModelSpec> models;
  DecodeConfig decode;
  std::string input;
  std::string output;
  std::string trace;
  std::string exemplars;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
};

struct DecodeOverrides {
  std::optional<double> tau_delta;
  std::optional<std::size_t> max_words_per_round;
  std::optional<std::size_t> branching_factor;
  std::optional<bool> diversity;
  std::optional<std::size_t> max_word_tokens;
  std::optional<std::size_t> max_new_words;
  std::optional<std::size_t> max_new_chars;
  std::vector<std::string> stop_sequences;
  std::optional<std::string> mode;
  std::optional<std::size_t> fixed_length;
  std::optional<std::size_t> beam_round_tokens;
  std::optional<std::size_t> topk_for_margin;
  std::optional<std::string> margin_source;

  void attach(CLI::App& app) {
    app.add_option("--tau", tau_delta, "Confidence margin threshold");
    app.add_option("--max-words-per-round", max_words_per_round, "Words committed per round at most");
    app.add_option("--branching-factor", branching_factor, "Distinct first tokens explored");
    app.add_option("--diversity", diversity, "Enable diversity-aware scaling (true/false)");
    app.add_option("--max-word-tokens", max_word_tokens, "Token cap per word");
    app.add_option("--max-new-words", max_new_words, "Generated word budget");
    app.add_option("--max-new-chars", max_new_chars, "Generated character budget");
    app.add_option("--stop", stop_sequences, "Stop sequence (repeatable; \\n is a newline)");
    app.add_option("--mode", mode, "adafuse | fixed_length | beam_round");
    app.add_option("--fixed-length", fixed_length, "Words per round in fixed_length mode");
    app.add_option("--beam-round-tokens", beam_round_tokens, "Tokens per round in beam_round mode");
    app.add_option("--topk-for-margin", topk_for_margin, "Top-k requested at word starts");
    app.add_option("--margin-source", margin_source, "word_start | next_word");
  }

  void apply(DecodeConfig& c) const {
    if (tau_delta) c.tau_delta = *tau_delta;
    if (max_words_per_round) c.max_words_per_round = *max_words_per_round;
    if (branching_factor) c.branching_factor = *branching_factor;
    if (diversity) c.diversity_enabled = *diversity;
    if (max_word_tokens) c.max_word_tokens = *max_word_tokens;
    if (max_new_words) c.max_new_words = *max_new_words;
    if (max_new_chars) c.max_new_chars = *max_new_chars;
    if (!stop_sequences.empty()) {
      c.stop_sequences.clear();
      for (const auto& s : stop_sequences) c.stop_sequences.push_back(unescape(s));
    }
    try {
      if (mode) c.mode = parse_decode_mode(*mode);
      if (margin_source) c.margin_source = parse_margin_source(*margin_source);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    if (fixed_length) c.fixed_length = *fixed_length;
    if (beam_round_tokens) c.beam_round_tokens = *beam_round_tokens;
    if (topk_for_margin) c.topk_for_margin = *topk_for_margin;
  }

  static std::string unescape(const std::string& s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '\\' && i + 1 < s.size()) {
        const char n = s[i + 1];
        if (n == 'n') { out += '\n'; ++i; continue; }
        if (n == 't') { out += '\t'; ++i; continue; }
        if (n == '\\') { out += '\\'; ++i; continue; }
      }
      out += s[i];
    }
    return out;
  }
};

std::string read_file(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError(std::string("cannot read ") + what + " '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return p;
  const fs::path path(p);
  return path.is_absolute() ? p : (base / path).lexically_normal().string();
}

RunConfig load_run_config(const std::string& path) {
  RunConfig cfg;
  json j;
  try {
    j = json::parse(read_file(path, "config"));
  } catch (const json::exception& e) {
    throw UsageError("config '" + path + "': " + e.what());
  }
  const fs::path base = fs::path(path).parent_path();
  try {
    if (!j.is_object()) throw UsageError("config '" + path + "': top level must be an object");
    for (const auto& [key, value] : j.items()) {
      if (key != "models" && key != "decode" && key != "io" && key != "seed" && key != "jobs" &&
          key != "exemplars") {
        throw UsageError("config '" + path + "': unknown key '" + key + "'");
      }
    }
    if (j.contains("models")) {
      for (const auto& m : j.at("models")) {
        ModelSpec spec;
        spec.kind = m.at("kind").get<std::string>();
        spec.locator = m.at("locator").get<std::string>();
        if (m.contains("tokenizer_kind")) spec.tokenizer = m.at("tokenizer_kind").get<std::string>();
        if (spec.kind == "ngram") {
          spec.locator = resolve(base, spec.locator);
        } else if (spec.kind != "remote") {
          throw UsageError("config: model kind must be 'ngram' or 'remote', got '" + spec.kind + "'");
        }
        cfg.models.push_back(std::move(spec));
      }
    }
    if (j.contains("decode")) apply_config_json(j.at("decode").dump(), cfg.decode);
    if (j.contains("io")) {
      const json& io = j.at("io");
      cfg.input = resolve(base, io.value("input", ""));
      cfg.output = resolve(base, io.value("output", ""));
      cfg.trace = resolve(base, io.value("trace", ""));
    }
    if (j.contains("exemplars")) cfg.exemplars = resolve(base, j.at("exemplars").get<std::string>());
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.jobs = j.value("jobs", std::size_t{1});
  } catch (const json::exception& e) {
    throw UsageError("config '" + path + "': " + e.what());
  } catch (const FormatError& e) {
    throw UsageError("config '" + path + "': " + e.what());
  }
  return cfg;
}

void apply_env_overrides(RunConfig& cfg) {
  for (std::size_t i = 0; i < cfg.models.size(); ++i) {
    const std::string name = "ADAFUSE_MODEL_" + std::to_string(i);
    if (const char* v = std::getenv(name.c_str()); v != nullptr && *v != '\0') cfg.models[i].locator = v;
  }
}

json effective_config(const RunConfig& cfg) {
  json models = json::array();
  for (const auto& m : cfg.models) {
    json e = {{"kind", m.kind}, {"locator", m.locator}};
    if (m.tokenizer) e["tokenizer_kind"] = *m.tokenizer;
    models.push_back(e);
  }
  json j = {{"models", models},
            {"decode", json::parse(config_to_json(cfg.decode))},
            {"io", {{"input", cfg.input}, {"output", cfg.output}, {"trace", cfg.trace}}},
            {"seed", cfg.seed},
            {"jobs", cfg.jobs}};
  if (!cfg.exemplars.empty()) j["exemplars"] = cfg.exemplars;
  return j;
}

struct LoadedModels {
  std::vector<std::unique_ptr<LanguageModel>> owned;
  std::vector<const LanguageModel*> ptrs;
};

LoadedModels load_models(const RunConfig& cfg) {
  if (cfg.models.empty()) throw UsageError("config: at least one model is required");
  LoadedModels out;
  for (const auto& spec : cfg.models) {
    if (spec.kind == "ngram") {
      if (!fs::exists(spec.locator)) throw UsageError("model file '" + spec.locator + "' not found");
      std::unique_ptr<NgramModel> m;
      try {
        m = std::make_unique<NgramModel>(NgramModel::load(spec.locator));
      } catch (const FormatError& e) {
        throw UsageError("model file '" + spec.locator + "': " + e.what());
      }
      if (spec.tokenizer && parse_tokenizer_kind(*spec.tokenizer) != m->tokenizer()) {
        throw UsageError("model file '" + spec.locator + "' uses tokenizer '" +
                         std::string(to_string(m->tokenizer())) + "', config says '" + *spec.tokenizer + "'");
      }
      out.owned.push_back(std::move(m));
    } else {
      out.owned.push_back(std::make_unique<RemoteModel>(spec.locator));
    }
    for (const LanguageModel* prev : out.ptrs) {
      if (prev->info().model_id == out.owned.back()->info().model_id) {
        throw UsageError("config: duplicate model_id '" + prev->info().model_id +
                         "' (retrain with distinct --model-id values)");
      }
    }
    out.ptrs.push_back(out.owned.back().get());
  }
  return out;
}

void open_output(std::ofstream& f, const std::string& path, const char* what) {
  f.open(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error(std::string("cannot write ") + what + " '" + path + "'");
}

EvalOptions eval_options(const RunConfig& cfg) {
  EvalOptions opts;
  opts.decode = cfg.decode;
  opts.jobs = cfg.jobs;
  if (!cfg.exemplars.empty()) {
    std::istringstream in(read_file(cfg.exemplars, "exemplars"));
    try {
      opts.exemplars = read_exemplars(in);
    } catch (const FormatError& e) {
      throw UsageError(e.what());
    }
  }
  try {
    opts.decode.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (opts.jobs == 0) throw UsageError("--jobs must be >= 1");
  return opts;
}

std::vector<ItemLine> read_input(const std::string& path) {
  if (path.empty()) throw UsageError("no input records file (set io.input or --input)");
  if (!fs::exists(path)) throw UsageError("input file '" + path + "' not found");
  return read_items_file(path);
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
  std::string corpus;
  int order = 3;
  double alpha = 1.0;
  std::string tokenizer = "char";
  std::string out;
  std::string model_id;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  std::ifstream in(a.corpus);
  if (!in) throw UsageError("cannot read corpus '" + a.corpus + "'");
  std::vector<std::string> docs;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) docs.push_back(line);
  }
  NgramOptions opts;
  opts.order = a.order;
  opts.alpha = a.alpha;
  opts.model_id = a.model_id;
  try {
    opts.tokenizer = parse_tokenizer_kind(a.tokenizer);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  NgramModel model = [&] {
    try {
      return NgramModel::train(docs, opts);
    } catch (const EmptyCorpusError& e) {
      throw UsageError("corpus '" + a.corpus + "': " + e.what());
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }();
  model.save(a.out);
  out << "wrote " << a.out << " (" << model.info().model_id << ", vocab " << model.info().vocab_size
      << ", " << docs.size() << " documents)\n";
  return kExitOk;
}

// ---- decode ---------------------------------------------------------------

struct RunArgs {
  std::string config;
  std::string input;
  std::string output;
  std::string trace;
  std::optional<std::size_t> jobs;
  bool print_config = false;
  DecodeOverrides overrides;
};

RunConfig effective(const RunArgs& a) {
  RunConfig cfg = a.config.empty() ? RunConfig{} : load_run_config(a.config);
  apply_env_overrides(cfg);
  a.overrides.apply(cfg.decode);
  if (!a.input.empty()) cfg.input = a.input;
  if (!a.output.empty()) cfg.output = a.output;
  if (!a.trace.empty()) cfg.trace = a.trace;
  if (a.jobs) cfg.jobs = *a.jobs;
  return cfg;
}

int cmd_decode(const RunArgs& a, std::ostream& out) {
  RunConfig cfg = effective(a);
  if (a.print_config) {
    out << effective_config(cfg).dump(2) << '\n';
    return kExitOk;
  }
  EvalOptions opts = eval_options(cfg);
  opts.keep_traces = !cfg.trace.empty();
  const std::vector<ItemLine> lines = read_input(cfg.input);
  LoadedModels models = load_models(cfg);

  std::vector<EvalItem> items;
  for (const auto& l : lines) {
    if (l.item) items.push_back(*l.item);
  }
  const std::vector<EvalRecord> records = evaluate(items, models.ptrs, opts);

  std::ofstream file;
  std::ostream* sink = &out;
  if (!cfg.output.empty()) {
    open_output(file, cfg.output, "output");
    sink = &file;
  }
  std::ofstream trace_file;
  if (!cfg.trace.empty()) open_output(trace_file, cfg.trace, "trace file");

  std::size_t next = 0;
  std::size_t failed = 0;
  for (const auto& l : lines) {
    if (!l.item) {
      *sink << json({{"line", l.line}, {"error", l.error}}).dump() << '\n';
      ++failed;
      continue;
    }
    const EvalRecord& r = records[next++];
    if (r.error) ++failed;
    *sink << record_to_json(r) << '\n';
    if (trace_file.is_open() && r.trace) {
      trace_file << "{\"id\":" << json(r.id).dump() << ",\"trace\":" << trace_to_json(*r.trace) << "}\n";
    }
  }
  if (!cfg.output.empty()) {
    out << "decoded " << records.size() << " records (" << failed << " with errors) -> " << cfg.output << '\n';
  }
  return kExitOk;
}

// ---- eval -----------------------------------------------------------------

struct EvalArgs {
  std::string predictions;
  std::string metric = "all";
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  if (a.metric != "em" && a.metric != "bleu" && a.metric != "all") {
    throw UsageError("--metric must be em, bleu or all");
  }
  std::istringstream in(read_file(a.predictions, "predictions"));
  std::vector<std::string> preds;
  std::vector<std::vector<std::string>> refs;
  double em = 0.0;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      if (j.contains("error") && !j.contains("prediction")) continue;
      preds.push_back(j.at("prediction").get<std::string>());
      refs.push_back(j.at("references").get<std::vector<std::string>>());
    } catch (const json::exception& e) {
      throw UsageError("predictions line " + std::to_string(number) + ": " + e.what());
    }
    em += exact_match(preds.back(), refs.back());
  }
  json report = {{"items", preds.size()}};
  if (a.metric != "bleu") report["exact_match"] = preds.empty() ? 0.0 : em / static_cast<double>(preds.size());
  if (a.metric != "em") {
    report["bleu"] = preds.empty() ? 0.0 : bleu(preds, std::span<const std::vector<std::string>>(refs));
  }
  out << report.dump(2) << '\n';
  return kExitOk;
}

// ---- sweep ----------------------------------------------------------------

struct SweepArgs {
  RunArgs run;
  std::string axis;
  std::vector<std::string> values;
  std::string report;
  std::string csv;
};

int cmd_sweep(const SweepArgs& a, std::ostream& out) {
  RunConfig cfg = effective(a.run);
  if (a.run.print_config) {
    out << effective_config(cfg).dump(2) << '\n';
    return kExitOk;
  }
  SweepAxis axis;
  try {
    axis = parse_sweep_axis(a.axis);
    for (const auto& v : a.values) apply_sweep_value(cfg.decode, axis, v);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  EvalOptions opts = eval_options(cfg);
  const std::vector<ItemLine> lines = read_input(cfg.input);
  std::vector<EvalItem> items;
  for (const auto& l : lines) {
    if (l.item) items.push_back(*l.item);
  }
  LoadedModels models = load_models(cfg);
  const SweepReport report = run_sweep(items, models.ptrs, opts, axis, a.values);

  const std::string json_text = sweep_report_json(report);
  if (a.report.empty()) {
    out << json_text;
  } else {
    std::ofstream f;
    open_output(f, a.report, "report");
    f << json_text;
  }
  if (!a.csv.empty()) {
    std::ofstream f;
    open_output(f, a.csv, "csv report");
    f << sweep_report_csv(report);
  }
  if (!a.report.empty()) out << sweep_report_csv(report);
  return kExitOk;
}

// ---- serve-check ----------------------------------------------------------

struct ServeCheckArgs {
  std::string url;
  std::string stub_model;
  std::vector<std::string> probes;
  std::size_t k = 8;
  double tolerance = 1e-9;
};

int cmd_serve_check(const ServeCheckArgs& a, std::ostream& out) {
  if (a.url.empty() == a.stub_model.empty()) throw UsageError("give exactly one of --url or --stub-model");
  ConformanceOptions opts;
  opts.probe_texts = a.probes;
  opts.k = a.k;
  opts.logprob_tolerance = a.tolerance;

  std::unique_ptr<NgramModel> local;
  std::unique_ptr<StubServer> stub;
  std::string url = a.url;
  if (!a.stub_model.empty()) {
    if (!fs::exists(a.stub_model)) throw UsageError("model file '" + a.stub_model + "' not found");
    local = std::make_unique<NgramModel>(NgramModel::load(a.stub_model));
    stub = std::make_unique<StubServer>(*local);
    stub->start();
    url = stub->base_url();
  }
  RemoteModel remote(url);
  const ConformanceReport report = run_conformance(remote, local.get(), opts);
  out << "endpoint " << url << " model " << remote.info().model_id << " vocab " << remote.info().vocab_size
      << " fingerprint " << remote.remote_info().tokenizer_fingerprint << '\n';
  out << report.to_text();
  return report.passed() ? kExitOk : kExitRuntime;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Adaptive word-level ensemble decoding with n-gram and remote language models", "adafuse"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train an n-gram model from a corpus (one document per line)");
  train_cmd->add_option("--corpus", train.corpus, "Corpus text file")->required();
  train_cmd->add_option("--order", train.order, "n-gram order")->capture_default_str();
  train_cmd->add_option("--alpha", train.alpha, "Additive smoothing")->capture_default_str();
  train_cmd->add_option("--tokenizer", train.tokenizer, "char | word")->capture_default_str();
  train_cmd->add_option("--out", train.out, "Model file to write")->required();
  train_cmd->add_option("--model-id", train.model_id, "Model id (default ngram-<tokenizer>-<order>)");

  RunArgs decode_args;
  auto* decode_cmd = app.add_subcommand("decode", "Decode every record of an input file");
  auto attach_run = [](CLI::App* cmd, RunArgs& r) {
    cmd->add_option("--config", r.config, "Run configuration (JSON)");
    cmd->add_option("--input", r.input, "Input records (JSON lines)");
    cmd->add_option("--output", r.output, "Output records (JSON lines); stdout if omitted");
    cmd->add_option("--trace", r.trace, "Write per-record decode traces (JSON lines)");
    cmd->add_option("--jobs", r.jobs, "Records decoded concurrently");
    cmd->add_flag("--print-config", r.print_config, "Print the effective configuration and exit");
    r.overrides.attach(*cmd);
  };
  attach_run(decode_cmd, decode_args);

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Score a predictions file");
  eval_cmd->add_option("--predictions", eval.predictions, "Records with prediction and references")->required();
  eval_cmd->add_option("--metric", eval.metric, "em | bleu | all")->capture_default_str();

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Evaluate one configuration axis over several values");
  attach_run(sweep_cmd, sweep.run);
  sweep_cmd->add_option("--axis", sweep.axis, "tau_delta | branching_factor | mode")->required();
  sweep_cmd->add_option("--values", sweep.values, "Comma-separated values")->required()->delimiter(',');
  sweep_cmd->add_option("--report", sweep.report, "JSON report path; stdout if omitted");
  sweep_cmd->add_option("--csv", sweep.csv, "CSV table path");

  ServeCheckArgs serve;
  auto* serve_cmd = app.add_subcommand("serve-check", "Run protocol conformance checks against a server");
  serve_cmd->add_option("--url", serve.url, "Server base URL");
  serve_cmd->add_option("--stub-model", serve.stub_model, "Serve this n-gram model in-process and check it");
  serve_cmd->add_option("--probe", serve.probes, "Extra probe text (repeatable)");
  serve_cmd->add_option("--k", serve.k, "Top-k size to probe")->capture_default_str();
  serve_cmd->add_option("--tolerance", serve.tolerance, "Logprob tolerance")->capture_default_str();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(train, out);
    if (decode_cmd->parsed()) return cmd_decode(decode_args, out);
    if (eval_cmd->parsed()) return cmd_eval(eval, out);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep, out);
    if (serve_cmd->parsed()) return cmd_serve_check(serve, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace adafuse::cli
