#include "adafuse/trace_io.hpp"

#include <set>

#include "adafuse/errors.hpp"
#include "json_codec.hpp"

namespace adafuse {

namespace detail {

using nlohmann::json;

namespace {

json candidate_json(const SpanCandidate& c) {
  json origin = {{"model_index", c.origin.model_index}, {"model_id", c.origin.model_id}};
  origin["branch"] = c.origin.branch ? json(*c.origin.branch) : json(nullptr);
  return {{"text", c.span_text}, {"words", c.word_count}, {"eos", c.is_eos}, {"origin", origin}};
}

SpanCandidate candidate_value(const json& j) {
  SpanCandidate c;
  c.span_text = j.at("text").get<std::string>();
  c.word_count = j.at("words").get<std::size_t>();
  c.is_eos = j.at("eos").get<bool>();
  const json& o = j.at("origin");
  c.origin.model_index = o.at("model_index").get<std::size_t>();
  c.origin.model_id = o.at("model_id").get<std::string>();
  if (!o.at("branch").is_null()) c.origin.branch = o.at("branch").get<std::size_t>();
  return c;
}

RoundTrigger parse_trigger(const std::string& name) {
  for (auto t : {RoundTrigger::confident, RoundTrigger::low_margin_halt, RoundTrigger::diversified,
                 RoundTrigger::eos, RoundTrigger::fixed_length, RoundTrigger::beam_round}) {
    if (to_string(t) == name) return t;
  }
  throw FormatError("unknown round trigger '" + name + "'");
}

StopReason parse_stop(const std::string& name) {
  for (auto r : {StopReason::eos, StopReason::stop_sequence, StopReason::max_new_words,
                 StopReason::max_new_chars, StopReason::error}) {
    if (to_string(r) == name) return r;
  }
  throw FormatError("unknown stop reason '" + name + "'");
}

}  // namespace

json trace_json(const DecodeTrace& trace, bool include_wall_time) {
  json rounds = json::array();
  for (const auto& r : trace.rounds) {
    json models = json::array();
    for (const auto& m : r.models) {
      json cands = json::array();
      for (const auto& c : m.candidates) cands.push_back(candidate_json(c));
      models.push_back({{"model_id", m.model_id},
                        {"trigger", std::string(to_string(m.trigger))},
                        {"margins", m.margins},
                        {"candidates", cands}});
    }
    json pool = json::array();
    for (const auto& c : r.pool) pool.push_back(candidate_json(c));
    json scores = json::array();
    for (const auto& fs : r.scores) {
      json per = json::array();
      for (const auto& ms : fs.per_model) {
        per.push_back({{"model_id", ms.model_id},
                       {"nll", ms.nll},
                       {"tokens", ms.token_count},
                       {"penalized", ms.penalized}});
      }
      scores.push_back({{"fused", fs.fused}, {"per_model", per}});
    }
    rounds.push_back({{"index", r.index},
                      {"models", models},
                      {"pool", pool},
                      {"scores", scores},
                      {"winner", r.winner},
                      {"committed", r.committed_text},
                      {"words", r.words_committed},
                      {"diversified", r.diversified}});
  }
  json totals = {{"rounds", trace.totals.rounds},
                 {"provider_forward_calls", trace.totals.provider_forward_calls},
                 {"scoring_calls", trace.totals.scoring_calls},
                 {"words", trace.totals.words}};
  if (include_wall_time) totals["wall_time_seconds"] = trace.totals.wall_time_seconds;
  return {{"rounds", rounds},
          {"totals", totals},
          {"stop_reason", std::string(to_string(trace.stop_reason))}};
}

DecodeTrace trace_value(const json& j) {
  DecodeTrace trace;
  for (const auto& r : j.at("rounds")) {
    RoundTrace rt;
    rt.index = r.at("index").get<std::size_t>();
    for (const auto& m : r.at("models")) {
      ModelRound mr;
      mr.model_id = m.at("model_id").get<std::string>();
      mr.trigger = parse_trigger(m.at("trigger").get<std::string>());
      mr.margins = m.at("margins").get<std::vector<double>>();
      for (const auto& c : m.at("candidates")) mr.candidates.push_back(candidate_value(c));
      rt.models.push_back(std::move(mr));
    }
    for (const auto& c : r.at("pool")) rt.pool.push_back(candidate_value(c));
    for (const auto& s : r.at("scores")) {
      FusionScore fs;
      fs.fused = s.at("fused").get<double>();
      for (const auto& ms : s.at("per_model")) {
        fs.per_model.push_back({ms.at("model_id").get<std::string>(), ms.at("nll").get<double>(),
                                ms.at("tokens").get<std::size_t>(),
                                ms.at("penalized").get<bool>()});
      }
      rt.scores.push_back(std::move(fs));
    }
    rt.winner = r.at("winner").get<std::size_t>();
    rt.committed_text = r.at("committed").get<std::string>();
    rt.words_committed = r.at("words").get<std::size_t>();
    rt.diversified = r.at("diversified").get<bool>();
    trace.rounds.push_back(std::move(rt));
  }
  const json& t = j.at("totals");
  trace.totals.rounds = t.at("rounds").get<std::size_t>();
  trace.totals.provider_forward_calls = t.at("provider_forward_calls").get<std::size_t>();
  trace.totals.scoring_calls = t.at("scoring_calls").get<std::size_t>();
  trace.totals.words = t.at("words").get<std::size_t>();
  trace.totals.wall_time_seconds = t.value("wall_time_seconds", 0.0);
  trace.stop_reason = parse_stop(j.at("stop_reason").get<std::string>());
  return trace;
}

json config_json(const DecodeConfig& c) {
  return {{"tau_delta", c.tau_delta},
          {"max_words_per_round", c.max_words_per_round},
          {"branching_factor", c.branching_factor},
          {"diversity_enabled", c.diversity_enabled},
          {"max_word_tokens", c.max_word_tokens},
          {"max_new_words", c.max_new_words},
          {"max_new_chars", c.max_new_chars},
          {"stop_sequences", c.stop_sequences},
          {"mode", std::string(to_string(c.mode))},
          {"fixed_length", c.fixed_length},
          {"beam_round_tokens", c.beam_round_tokens},
          {"topk_for_margin", c.topk_for_margin},
          {"margin_source", std::string(to_string(c.margin_source))},
          {"jobs", c.jobs}};
}

void apply_config_json(const json& j, DecodeConfig& c) {
  if (!j.is_object()) throw FormatError("decode config must be an object");
  static const std::set<std::string> known = {
      "tau_delta",       "max_words_per_round", "branching_factor", "diversity_enabled",
      "max_word_tokens", "max_new_words",       "max_new_chars",    "stop_sequences",
      "mode",            "fixed_length",        "beam_round_tokens", "topk_for_margin",
      "margin_source",   "jobs"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw FormatError("decode config: unknown key '" + key + "'");
    try {
      if (key == "tau_delta") c.tau_delta = value.get<double>();
      else if (key == "max_words_per_round") c.max_words_per_round = value.get<std::size_t>();
      else if (key == "branching_factor") c.branching_factor = value.get<std::size_t>();
      else if (key == "diversity_enabled") c.diversity_enabled = value.get<bool>();
      else if (key == "max_word_tokens") c.max_word_tokens = value.get<std::size_t>();
      else if (key == "max_new_words") c.max_new_words = value.get<std::size_t>();
      else if (key == "max_new_chars") c.max_new_chars = value.get<std::size_t>();
      else if (key == "stop_sequences") c.stop_sequences = value.get<std::vector<std::string>>();
      else if (key == "mode") c.mode = parse_decode_mode(value.get<std::string>());
      else if (key == "fixed_length") c.fixed_length = value.get<std::size_t>();
      else if (key == "beam_round_tokens") c.beam_round_tokens = value.get<std::size_t>();
      else if (key == "topk_for_margin") c.topk_for_margin = value.get<std::size_t>();
      else if (key == "margin_source") c.margin_source = parse_margin_source(value.get<std::string>());
      else if (key == "jobs") c.jobs = value.get<std::size_t>();
    } catch (const json::exception& e) {
      throw FormatError("decode config: bad value for '" + key + "': " + e.what());
    } catch (const std::invalid_argument& e) {
      throw FormatError("decode config: " + std::string(e.what()));
    }
  }
}

}  // namespace detail

std::string trace_to_json(const DecodeTrace& trace, bool include_wall_time, int indent) {
  return detail::trace_json(trace, include_wall_time).dump(indent);
}

DecodeTrace trace_from_json(std::string_view text) {
  try {
    return detail::trace_value(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("trace: ") + e.what());
  }
}

std::string config_to_json(const DecodeConfig& config, int indent) {
  return detail::config_json(config).dump(indent);
}

void apply_config_json(std::string_view json_object, DecodeConfig& config) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_object);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("decode config: ") + e.what());
  }
  detail::apply_config_json(j, config);
}

}  // namespace adafuse
