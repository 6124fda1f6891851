#include "adafuse/ngram_lm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "adafuse/errors.hpp"
#include "adafuse/text.hpp"
#include "json.hpp"

namespace adafuse {

using nlohmann::ordered_json;

std::string_view to_string(TokenizerKind kind) {
  return kind == TokenizerKind::character ? "char" : "word";
}

TokenizerKind parse_tokenizer_kind(std::string_view name) {
  if (name == "char" || name == "character") return TokenizerKind::character;
  if (name == "word" || name == "whitespace") return TokenizerKind::word;
  throw FormatError("unknown tokenizer kind '" + std::string(name) + "'");
}

std::vector<std::string> NgramModel::symbols(std::string_view s, TokenizerKind kind) {
  std::vector<std::string> out;
  if (kind == TokenizerKind::character) {
    for (auto cp : text::codepoints(s)) out.emplace_back(cp);
    return out;
  }
  std::string word;
  std::size_t pos = 0;
  while (pos < s.size()) {
    const std::size_t start = pos;
    if (text::is_space(text::next_codepoint(s, pos))) {
      if (!word.empty()) out.push_back(std::move(word));
      word.clear();
      out.emplace_back(s.substr(start, pos - start));
    } else {
      word.append(s.substr(start, pos - start));
    }
  }
  if (!word.empty()) out.push_back(std::move(word));
  return out;
}

NgramModel NgramModel::train(std::span<const std::string> corpus, const NgramOptions& options) {
  if (corpus.empty()) throw EmptyCorpusError("cannot train an n-gram model on an empty corpus");
  if (options.order < 1) throw std::invalid_argument("n-gram order must be at least 1");
  if (!(options.alpha > 0.0) || !std::isfinite(options.alpha)) {
    throw std::invalid_argument("smoothing constant alpha must be positive and finite");
  }

  std::vector<std::vector<std::string>> docs;
  docs.reserve(corpus.size());
  std::set<std::string> alphabet;
  for (const auto& doc : corpus) {
    docs.push_back(symbols(doc, options.tokenizer));
    alphabet.insert(docs.back().begin(), docs.back().end());
  }

  NgramModel model;
  model.order_ = options.order;
  model.alpha_ = options.alpha;
  model.tokenizer_ = options.tokenizer;
  model.surfaces_.emplace_back(kEosSurface);
  for (const auto& sym : alphabet) {
    model.index_.emplace(sym, static_cast<TokenId>(model.surfaces_.size()));
    model.surfaces_.push_back(sym);
  }
  model.info_.model_id = options.model_id.empty()
                             ? "ngram-" + std::string(to_string(options.tokenizer)) + "-" +
                                   std::to_string(options.order)
                             : options.model_id;
  model.info_.max_context_tokens = options.max_context_tokens;

  std::map<Context, std::map<TokenId, std::uint64_t>> raw;
  const auto history_len = static_cast<std::size_t>(options.order - 1);
  for (const auto& doc : docs) {
    Context window(history_len, kBos);
    auto observe = [&](TokenId next) {
      ++raw[window][next];
      if (history_len > 0) {
        window.erase(window.begin());
        window.push_back(next);
      }
    };
    for (const auto& sym : doc) observe(model.index_.at(sym));
    observe(kEos);
  }
  model.finalize(std::move(raw));
  return model;
}

void NgramModel::finalize(std::map<Context, std::map<TokenId, std::uint64_t>>&& raw) {
  info_.eos_surface = std::string(kEosSurface);
  info_.eos_token = kEos;
  info_.vocab_size = surfaces_.size();
  tables_.clear();
  for (auto& [ctx, nexts] : raw) {
    Table table;
    for (const auto& [tok, n] : nexts) {
      if (n == 0) continue;
      table.total += n;
      table.counts.emplace_back(tok, n);
    }
    if (table.counts.empty()) continue;
    std::sort(table.counts.begin(), table.counts.end(), [](const auto& a, const auto& b) {
      return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    tables_.emplace(ctx, std::move(table));
  }
}

TokenId NgramModel::lookup(std::string_view surface) const {
  auto it = index_.find(std::string(surface));
  return it == index_.end() ? kUnknown : it->second;
}

TokenSequence NgramModel::encode(std::string_view text) const {
  TokenSequence out;
  for (const auto& sym : symbols(text, tokenizer_)) out.push_back(lookup(sym));
  return out;
}

std::string NgramModel::decode(std::span<const TokenId> tokens) const {
  std::string out;
  for (TokenId t : tokens) {
    if (t >= surfaces_.size()) {
      throw InvalidTokenError(info_.model_id + ": token id " + std::to_string(t) +
                              " is outside the vocabulary of " +
                              std::to_string(surfaces_.size()));
    }
    if (t != kEos) out += surfaces_[t];
  }
  return out;
}

NgramModel::Context NgramModel::context_key(std::span<const TokenId> history) const {
  const auto len = static_cast<std::size_t>(order_ - 1);
  Context key(len, kBos);
  const std::size_t take = std::min(len, history.size());
  std::copy(history.end() - static_cast<std::ptrdiff_t>(take), history.end(),
            key.end() - static_cast<std::ptrdiff_t>(take));
  return key;
}

const NgramModel::Table* NgramModel::find(std::span<const TokenId> history) const {
  auto it = tables_.find(context_key(history));
  return it == tables_.end() ? nullptr : &it->second;
}

double NgramModel::log_denominator(const Table* table) const {
  const double total = table ? static_cast<double>(table->total) : 0.0;
  return std::log(total + alpha_ * static_cast<double>(surfaces_.size()));
}

std::uint64_t NgramModel::count(std::span<const TokenId> history, TokenId next) const {
  const Table* table = find(history);
  if (!table) return 0;
  for (const auto& [tok, n] : table->counts) {
    if (tok == next) return n;
  }
  return 0;
}

std::uint64_t NgramModel::total(std::span<const TokenId> history) const {
  const Table* table = find(history);
  return table ? table->total : 0;
}

double NgramModel::logprob(std::span<const TokenId> history, TokenId next) const {
  if (next >= surfaces_.size()) {
    throw InvalidTokenError(info_.model_id + ": cannot score token id " + std::to_string(next));
  }
  const Table* table = find(history);
  std::uint64_t n = 0;
  if (table) {
    for (const auto& [tok, c] : table->counts) {
      if (tok == next) {
        n = c;
        break;
      }
    }
  }
  return std::log(static_cast<double>(n) + alpha_) - log_denominator(table);
}

std::vector<double> NgramModel::full_distribution(std::span<const TokenId> history) const {
  const Table* table = find(history);
  const double denom = log_denominator(table);
  std::vector<double> out(surfaces_.size(), std::log(alpha_) - denom);
  if (table) {
    for (const auto& [tok, n] : table->counts) {
      out[tok] = std::log(static_cast<double>(n) + alpha_) - denom;
    }
  }
  return out;
}

TokenDistribution NgramModel::topk(std::span<const TokenId> context, std::size_t k) const {
  TokenDistribution dist;
  dist.k = k;
  const Table* table = find(context);
  const double denom = log_denominator(table);
  const std::size_t want = std::min(k, surfaces_.size());
  dist.entries.reserve(want);

  std::vector<TokenId> seen;
  if (table) {
    for (const auto& [tok, n] : table->counts) {
      seen.push_back(tok);
      if (dist.entries.size() < want) {
        dist.entries.push_back({tok, std::log(static_cast<double>(n) + alpha_) - denom,
                                tok == kEos ? std::string() : surfaces_[tok]});
      }
    }
    std::sort(seen.begin(), seen.end());
  }
  const double unseen = std::log(alpha_) - denom;
  for (TokenId id = 0; dist.entries.size() < want && id < surfaces_.size(); ++id) {
    if (std::binary_search(seen.begin(), seen.end(), id)) continue;
    dist.entries.push_back({id, unseen, id == kEos ? std::string() : surfaces_[id]});
  }
  return dist;
}

std::vector<double> NgramModel::score_tokens(std::span<const TokenId> context,
                                             std::span<const TokenId> continuation) const {
  std::vector<TokenId> history(context.begin(), context.end());
  std::vector<double> out;
  out.reserve(continuation.size());
  for (TokenId t : continuation) {
    out.push_back(logprob(history, t));
    history.push_back(t);
  }
  return out;
}

// Model file: a versioned JSON document
//   {"format": "adafuse-ngram", "version": 1, "model_id", "order", "alpha",
//    "tokenizer": "char"|"word", "max_context_tokens", "vocab": [surface by id],
//    "counts": [{"context": [id | -1 for BOS], "next": [[id, count], ...]}]}
// Count tables are listed in lexicographic context order and next-token
// entries by ascending id, so identical models serialize to identical bytes.
std::string NgramModel::serialize() const {
  ordered_json doc;
  doc["format"] = "adafuse-ngram";
  doc["version"] = kFormatVersion;
  doc["model_id"] = info_.model_id;
  doc["order"] = order_;
  doc["alpha"] = alpha_;
  doc["tokenizer"] = std::string(to_string(tokenizer_));
  doc["max_context_tokens"] = info_.max_context_tokens;
  doc["vocab"] = surfaces_;
  ordered_json counts = ordered_json::array();
  for (const auto& [ctx, table] : tables_) {
    ordered_json ctx_json = ordered_json::array();
    for (TokenId t : ctx) {
      if (t == kBos) {
        ctx_json.push_back(-1);
      } else {
        ctx_json.push_back(t);
      }
    }
    auto by_id = table.counts;
    std::sort(by_id.begin(), by_id.end());
    ordered_json next = ordered_json::array();
    for (const auto& [tok, n] : by_id) next.push_back({tok, n});
    counts.push_back({{"context", std::move(ctx_json)}, {"next", std::move(next)}});
  }
  doc["counts"] = std::move(counts);
  return doc.dump(1) + "\n";
}

NgramModel NgramModel::deserialize(std::string_view data) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(data);
  } catch (const ordered_json::parse_error& e) {
    throw FormatError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != "adafuse-ngram") {
      throw FormatError("model file: format is not adafuse-ngram");
    }
    const int version = doc.at("version").get<int>();
    if (version != kFormatVersion) {
      throw FormatError("model file: unsupported version " + std::to_string(version));
    }
    NgramModel model;
    model.order_ = doc.at("order").get<int>();
    model.alpha_ = doc.at("alpha").get<double>();
    model.tokenizer_ = parse_tokenizer_kind(doc.at("tokenizer").get<std::string>());
    model.info_.model_id = doc.at("model_id").get<std::string>();
    model.info_.max_context_tokens = doc.at("max_context_tokens").get<std::size_t>();
    model.surfaces_ = doc.at("vocab").get<std::vector<std::string>>();
    if (model.order_ < 1 || !(model.alpha_ > 0.0) || model.surfaces_.empty()) {
      throw FormatError("model file: invalid order, alpha or vocabulary");
    }
    for (std::size_t id = 1; id < model.surfaces_.size(); ++id) {
      model.index_.emplace(model.surfaces_[id], static_cast<TokenId>(id));
    }
    const auto history_len = static_cast<std::size_t>(model.order_ - 1);
    std::map<Context, std::map<TokenId, std::uint64_t>> raw;
    for (const auto& entry : doc.at("counts")) {
      Context ctx;
      for (const auto& t : entry.at("context")) {
        const auto v = t.get<std::int64_t>();
        if (v < -1 || v >= static_cast<std::int64_t>(model.surfaces_.size())) {
          throw FormatError("model file: context id out of range");
        }
        ctx.push_back(v == -1 ? kBos : static_cast<TokenId>(v));
      }
      if (ctx.size() != history_len) throw FormatError("model file: context length != order-1");
      auto& nexts = raw[ctx];
      for (const auto& pair : entry.at("next")) {
        const auto tok = pair.at(0).get<std::uint64_t>();
        if (tok >= model.surfaces_.size()) throw FormatError("model file: next id out of range");
        nexts[static_cast<TokenId>(tok)] = pair.at(1).get<std::uint64_t>();
      }
    }
    model.finalize(std::move(raw));
    return model;
  } catch (const ordered_json::exception& e) {
    throw FormatError(std::string("model file: ") + e.what());
  }
}

NgramModel NgramModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open model file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize(buf.str());
}

void NgramModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write model file " + path.string());
  out << serialize();
}

}  // namespace adafuse
