#include "adafuse/stub_server.hpp"

#include <atomic>
#include <cstdio>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "adafuse/errors.hpp"

namespace adafuse {

using nlohmann::json;

std::string tokenizer_fingerprint(const LanguageModel& model) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](unsigned char byte) {
    h ^= byte;
    h *= 0x100000001b3ULL;
  };
  for (TokenId id = 0; id < model.info().vocab_size; ++id) {
    const TokenId one[] = {id};
    for (char c : model.decode(one)) mix(static_cast<unsigned char>(c));
    mix(0xff);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

struct HttpError {
  int status;
  std::string code;
  std::string message;
};

TokenSequence tokens_of(const json& body, const std::string& name, std::size_t vocab_size) {
  if (!body.contains(name) || !body.at(name).is_array()) {
    throw HttpError{400, "bad_request", "field '" + name + "' must be an array of token ids"};
  }
  TokenSequence out;
  for (const auto& v : body.at(name)) {
    if (!v.is_number_unsigned()) {
      throw HttpError{400, "bad_request", "field '" + name + "' must hold non-negative integers"};
    }
    const auto id = v.get<std::uint64_t>();
    if (id >= vocab_size) {
      throw HttpError{400, "invalid_token", "token id " + std::to_string(id) + " outside vocabulary"};
    }
    out.push_back(static_cast<TokenId>(id));
  }
  return out;
}

}  // namespace

struct StubServer::Impl {
  const LanguageModel& model;
  StubOptions options;
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::atomic<std::size_t> served{0};
  std::mutex fail_mutex;
  std::optional<std::size_t> fail_after;
  std::mutex model_mutex;
  std::string fingerprint;

  Impl(const LanguageModel& m, StubOptions o)
      : model(m), options(std::move(o)), fail_after(options.fail_after) {}

  template <typename Fn>
  void route(const std::string& path, bool post, Fn fn) {
    auto handler = [this, path, fn](const httplib::Request& req, httplib::Response& res) {
      const std::size_t n = served++;
      {
        std::lock_guard lock(fail_mutex);
        if (fail_after && n >= *fail_after) {
          res.status = 503;
          res.set_content(json({{"error", {{"code", "unavailable"}, {"message", "injected failure"}}}}).dump(),
                          "application/json");
          return;
        }
      }
      try {
        json body;
        if (!req.body.empty()) {
          try {
            body = json::parse(req.body);
          } catch (const json::exception&) {
            throw HttpError{400, "bad_request", "request body is not JSON"};
          }
        }
        json out;
        {
          std::unique_lock<std::mutex> lock;
          if (!model.thread_safe()) lock = std::unique_lock<std::mutex>(model_mutex);
          out = fn(body);
        }
        std::string text = out.dump();
        if (options.tamper) options.tamper(path, text);
        res.status = 200;
        res.set_content(text, "application/json");
        return;
      } catch (const HttpError& e) {
        res.status = e.status;
        res.set_content(json({{"error", {{"code", e.code}, {"message", e.message}}}}).dump(),
                        "application/json");
        return;
      } catch (const ContextOverflowError& e) {
        res.status = 400;
        res.set_content(json({{"error", {{"code", "context_overflow"}, {"message", e.what()}}}}).dump(),
                        "application/json");
      } catch (const InvalidTokenError& e) {
        res.status = 400;
        res.set_content(json({{"error", {{"code", "invalid_token"}, {"message", e.what()}}}}).dump(),
                        "application/json");
      } catch (const UnreachableContextError& e) {
        res.status = 400;
        res.set_content(
            json({{"error", {{"code", "unreachable_context"}, {"message", e.what()}}}}).dump(),
            "application/json");
      } catch (const std::exception& e) {
        res.status = 500;
        res.set_content(json({{"error", {{"code", "internal"}, {"message", e.what()}}}}).dump(),
                        "application/json");
      }
    };
    if (post) {
      server.Post(path, handler);
    } else {
      server.Get(path, handler);
    }
  }

  void install() {
    const ModelInfo& info = model.info();
    route("/v1/info", false, [this, &info](const json&) {
      json j = {{"model_id", info.model_id},
                {"vocab_size", info.vocab_size},
                {"eos_token_id", info.eos_token},
                {"tokenizer_fingerprint", fingerprint},
                {"max_context_tokens", info.max_context_tokens},
                {"eos_surface", info.eos_surface}};
      return j;
    });
    route("/v1/encode", true, [this](const json& body) {
      if (!body.contains("text") || !body.at("text").is_string()) {
        throw HttpError{400, "bad_request", "field 'text' must be a string"};
      }
      return json({{"tokens", model.encode(body.at("text").get<std::string>())}});
    });
    route("/v1/decode", true, [this, &info](const json& body) {
      return json({{"text", model.decode(tokens_of(body, "tokens", info.vocab_size))}});
    });
    route("/v1/topk", true, [this, &info](const json& body) {
      const TokenSequence ctx = tokens_of(body, "tokens", info.vocab_size);
      if (!body.contains("k") || !body.at("k").is_number_unsigned() || body.at("k").get<std::size_t>() == 0) {
        throw HttpError{400, "bad_request", "field 'k' must be a positive integer"};
      }
      std::size_t k = body.at("k").get<std::size_t>();
      if (options.topk_cap > 0) k = std::min(k, options.topk_cap);
      check_context(model, ctx.size() + 1);
      const TokenDistribution dist = model.topk(ctx, k);
      json cands = json::array();
      for (const auto& e : dist.entries) {
        cands.push_back({{"token", e.token}, {"logprob", e.logprob}, {"surface", e.surface}});
      }
      return json({{"candidates", cands}});
    });
    route("/v1/score", true, [this, &info](const json& body) {
      const TokenSequence ctx = tokens_of(body, "prefix_tokens", info.vocab_size);
      const TokenSequence cont = tokens_of(body, "continuation_tokens", info.vocab_size);
      check_context(model, ctx.size() + cont.size());
      return json({{"logprobs", model.score_tokens(ctx, cont)}});
    });
  }
};

StubServer::StubServer(const LanguageModel& model, StubOptions options)
    : impl_(std::make_unique<Impl>(model, std::move(options))) {
  impl_->fingerprint = tokenizer_fingerprint(model);
  impl_->server.set_tcp_nodelay(true);
  impl_->install();
}

StubServer::~StubServer() { stop(); }

void StubServer::start() {
  if (impl_->thread.joinable()) return;
  auto& srv = impl_->server;
  const auto& o = impl_->options;
  if (o.port == 0) {
    impl_->port = srv.bind_to_any_port(o.host);
  } else {
    impl_->port = srv.bind_to_port(o.host, o.port) ? o.port : -1;
  }
  if (impl_->port <= 0) {
    throw ProviderUnavailableError("stub server: cannot bind " + o.host + ":" + std::to_string(o.port));
  }
  impl_->thread = std::thread([&srv] { srv.listen_after_bind(); });
  srv.wait_until_ready();
}

void StubServer::stop() {
  if (!impl_->thread.joinable()) return;
  impl_->server.stop();
  impl_->thread.join();
}

int StubServer::port() const { return impl_->port; }

std::string StubServer::base_url() const {
  return "http://" + impl_->options.host + ":" + std::to_string(impl_->port);
}

std::size_t StubServer::requests_served() const { return impl_->served; }

void StubServer::set_fail_after(std::optional<std::size_t> n) {
  std::lock_guard lock(impl_->fail_mutex);
  impl_->fail_after = n;
  impl_->served = 0;
}

}  // namespace adafuse
