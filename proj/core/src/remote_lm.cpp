#include "adafuse/remote_lm.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "adafuse/errors.hpp"

namespace adafuse {

using nlohmann::json;

namespace {

const json& field(const json& j, const std::string& name, const std::string& where) {
  if (!j.is_object() || !j.contains(name)) {
    throw ProtocolError(where + ": missing field '" + name + "'");
  }
  return j.at(name);
}

std::uint64_t unsigned_field(const json& v, const std::string& name) {
  if (!v.is_number_unsigned()) {
    throw ProtocolError(name + ": expected a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

std::string string_field(const json& v, const std::string& name) {
  if (!v.is_string()) throw ProtocolError(name + ": expected a string");
  return v.get<std::string>();
}

double number_field(const json& v, const std::string& name) {
  if (!v.is_number()) throw ProtocolError(name + ": expected a number");
  const double x = v.get<double>();
  if (std::isnan(x)) throw ProtocolError(name + ": NaN");
  return x;
}

TokenSequence token_array(const json& v, const std::string& name, std::size_t vocab_size) {
  if (!v.is_array()) throw ProtocolError(name + ": expected an array");
  TokenSequence out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string item = name + "[" + std::to_string(i) + "]";
    const auto id = unsigned_field(v[i], item);
    if (id >= vocab_size) throw ProtocolError(item + ": id " + std::to_string(id) + " outside vocabulary");
    out.push_back(static_cast<TokenId>(id));
  }
  return out;
}

[[noreturn]] void raise_server_error(int status, const json& body, const std::string& path) {
  std::string code = "unknown";
  std::string message;
  if (body.is_object() && body.contains("error") && body.at("error").is_object()) {
    const json& e = body.at("error");
    if (e.contains("code") && e.at("code").is_string()) code = e.at("code").get<std::string>();
    if (e.contains("message") && e.at("message").is_string()) message = e.at("message").get<std::string>();
  }
  const std::string what = path + ": " + code + " (HTTP " + std::to_string(status) + ")" +
                           (message.empty() ? "" : ": " + message);
  if (code == "context_overflow") throw ContextOverflowError(what);
  if (code == "invalid_token") throw InvalidTokenError(what);
  if (code == "unreachable_context") throw UnreachableContextError(what);
  if (code == "unavailable" || status >= 500) throw ProviderUnavailableError(what);
  throw ProtocolError(what);
}

}  // namespace

RemoteInfo parse_remote_info(std::string_view body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception&) {
    throw ProtocolError("/v1/info: response is not JSON");
  }
  RemoteInfo info;
  info.model.model_id = string_field(field(j, "model_id", "/v1/info"), "model_id");
  if (info.model.model_id.empty()) throw ProtocolError("model_id: empty");
  const auto vocab = unsigned_field(field(j, "vocab_size", "/v1/info"), "vocab_size");
  if (vocab == 0) throw ProtocolError("vocab_size: must be positive");
  info.model.vocab_size = vocab;
  const auto eos = unsigned_field(field(j, "eos_token_id", "/v1/info"), "eos_token_id");
  if (eos >= vocab) throw ProtocolError("eos_token_id: outside vocabulary");
  info.model.eos_token = static_cast<TokenId>(eos);
  info.tokenizer_fingerprint =
      string_field(field(j, "tokenizer_fingerprint", "/v1/info"), "tokenizer_fingerprint");
  info.model.max_context_tokens = std::numeric_limits<std::size_t>::max();
  if (j.contains("max_context_tokens")) {
    info.model.max_context_tokens = unsigned_field(j.at("max_context_tokens"), "max_context_tokens");
  }
  if (j.contains("eos_surface")) info.model.eos_surface = string_field(j.at("eos_surface"), "eos_surface");
  return info;
}

struct RemoteModel::Impl {
  std::string base_url;
  RemoteOptions options;
  RemoteInfo info;
  std::mutex pool_mutex;
  std::vector<std::unique_ptr<httplib::Client>> idle;
  std::atomic<std::size_t> retries{0};

  std::unique_ptr<httplib::Client> acquire() {
    {
      std::lock_guard lock(pool_mutex);
      if (!idle.empty()) {
        auto c = std::move(idle.back());
        idle.pop_back();
        return c;
      }
    }
    auto c = std::make_unique<httplib::Client>(base_url);
    if (!c->is_valid()) throw ProviderUnavailableError("invalid endpoint '" + base_url + "'");
    const auto secs = options.timeout.count() / 1000;
    const auto usecs = (options.timeout.count() % 1000) * 1000;
    c->set_connection_timeout(secs, usecs);
    c->set_read_timeout(secs, usecs);
    c->set_write_timeout(secs, usecs);
    c->set_keep_alive(true);
    c->set_tcp_nodelay(true);
    return c;
  }

  void release(std::unique_ptr<httplib::Client> c) {
    std::lock_guard lock(pool_mutex);
    idle.push_back(std::move(c));
  }

  // One request with transport retries. Returns the parsed 2xx body.
  json call(const std::string& path, const json* request) {
    std::string last_error;
    auto backoff = options.backoff;
    bool retried = false;
    for (std::size_t attempt = 0; attempt < std::max<std::size_t>(options.attempts, 1); ++attempt) {
      if (attempt > 0) {
        ++retries;
        retried = true;
        std::this_thread::sleep_for(backoff);
        backoff *= 2;
      }
      auto client = acquire();
      httplib::Result res = request == nullptr
                                ? client->Get(path)
                                : client->Post(path, request->dump(), "application/json");
      if (!res) {
        last_error = httplib::to_string(res.error());
        continue;  // drop the client; its connection is suspect
      }
      const int status = res->status;
      const std::string body = res->body;
      release(std::move(client));
      json parsed;
      try {
        parsed = json::parse(body);
      } catch (const json::exception&) {
        if (status == 503) {
          last_error = "HTTP 503";
          continue;
        }
        throw ProtocolError(path + ": response is not JSON (HTTP " + std::to_string(status) + ")");
      }
      if (status == 503) {
        last_error = "HTTP 503";
        continue;
      }
      if (status < 200 || status >= 300) raise_server_error(status, parsed, path);
      if (retried && path != "/v1/info") recheck_fingerprint();
      return parsed;
    }
    throw ProviderUnavailableError(base_url + path + ": " + last_error);
  }

  void recheck_fingerprint() {
    const json j = call("/v1/info", nullptr);
    const RemoteInfo fresh = parse_remote_info(j.dump());
    if (fresh.tokenizer_fingerprint != info.tokenizer_fingerprint) {
      throw ProtocolError("tokenizer_fingerprint: changed from '" + info.tokenizer_fingerprint +
                          "' to '" + fresh.tokenizer_fingerprint + "' within a session");
    }
  }
};

RemoteModel::RemoteModel(std::string base_url, RemoteOptions options)
    : impl_(std::make_unique<Impl>()) {
  while (!base_url.empty() && base_url.back() == '/') base_url.pop_back();
  impl_->base_url = std::move(base_url);
  impl_->options = options;
  impl_->info = parse_remote_info(impl_->call("/v1/info", nullptr).dump());
}

RemoteModel::~RemoteModel() = default;

const ModelInfo& RemoteModel::info() const { return impl_->info.model; }
const RemoteInfo& RemoteModel::remote_info() const { return impl_->info; }
const std::string& RemoteModel::base_url() const { return impl_->base_url; }
std::size_t RemoteModel::retries() const { return impl_->retries; }

TokenSequence RemoteModel::encode(std::string_view text) const {
  const json req = {{"text", std::string(text)}};
  const json res = impl_->call("/v1/encode", &req);
  return token_array(field(res, "tokens", "/v1/encode"), "tokens", info().vocab_size);
}

std::string RemoteModel::decode(std::span<const TokenId> tokens) const {
  const json req = {{"tokens", std::vector<TokenId>(tokens.begin(), tokens.end())}};
  const json res = impl_->call("/v1/decode", &req);
  return string_field(field(res, "text", "/v1/decode"), "text");
}

TokenDistribution RemoteModel::topk(std::span<const TokenId> context, std::size_t k) const {
  if (k == 0) throw std::invalid_argument("topk: k must be positive");
  const json req = {{"tokens", std::vector<TokenId>(context.begin(), context.end())}, {"k", k}};
  const json res = impl_->call("/v1/topk", &req);
  const json& cands = field(res, "candidates", "/v1/topk");
  if (!cands.is_array()) throw ProtocolError("candidates: expected an array");
  if (cands.empty()) throw ProtocolError("candidates: empty");
  TokenDistribution dist;
  dist.k = k;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    const std::string where = "candidates[" + std::to_string(i) + "]";
    const json& c = cands[i];
    TokenCandidate tc;
    const auto id = unsigned_field(field(c, "token", where), where + ".token");
    tc.token = static_cast<TokenId>(std::min<std::uint64_t>(id, std::numeric_limits<TokenId>::max()));
    if (id >= info().vocab_size) throw ProtocolError(where + ".token: id " + std::to_string(id) + " outside vocabulary");
    tc.logprob = number_field(field(c, "logprob", where), where + ".logprob");
    tc.surface = string_field(field(c, "surface", where), where + ".surface");
    dist.entries.push_back(std::move(tc));
  }
  validate_distribution(dist, k, info().vocab_size);
  return dist;
}

std::vector<double> RemoteModel::score_tokens(std::span<const TokenId> context,
                                              std::span<const TokenId> continuation) const {
  const json req = {{"prefix_tokens", std::vector<TokenId>(context.begin(), context.end())},
                    {"continuation_tokens",
                     std::vector<TokenId>(continuation.begin(), continuation.end())}};
  const json res = impl_->call("/v1/score", &req);
  const json& lps = field(res, "logprobs", "/v1/score");
  if (!lps.is_array()) throw ProtocolError("logprobs: expected an array");
  if (lps.size() != continuation.size()) {
    throw ProtocolError("logprobs: length " + std::to_string(lps.size()) + " != " +
                        std::to_string(continuation.size()) + " continuation tokens");
  }
  std::vector<double> out;
  out.reserve(lps.size());
  for (std::size_t i = 0; i < lps.size(); ++i) {
    const std::string where = "logprobs[" + std::to_string(i) + "]";
    const double x = number_field(lps[i], where);
    if (x > 0.0) throw ProtocolError(where + ": positive logprob");
    out.push_back(x);
  }
  return out;
}

}  // namespace adafuse
