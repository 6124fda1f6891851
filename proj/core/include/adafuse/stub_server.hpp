#pragma once

// In-process server exposing any LanguageModel over the logprob wire
// protocol (see remote_lm.hpp). Used for conformance testing and as an
// oracle for the remote provider.

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "adafuse/lm_core.hpp"

namespace adafuse {

struct StubOptions {
  std::string host = "127.0.0.1";
  int port = 0;  // 0 binds an ephemeral port
  // After this many served requests every further request gets HTTP 503.
  std::optional<std::size_t> fail_after;
  std::size_t topk_cap = 0;  // 0: no cap
  // Rewrites a successful response body before it is sent (fault injection).
  std::function<void(const std::string& path, std::string& body)> tamper;
};

class StubServer {
 public:
  explicit StubServer(const LanguageModel& model, StubOptions options = {});
  ~StubServer();
  StubServer(const StubServer&) = delete;
  StubServer& operator=(const StubServer&) = delete;

  // Binds and starts serving on a background thread. Throws ProviderUnavailableError.
  void start();
  void stop();

  int port() const;
  std::string base_url() const;
  std::size_t requests_served() const;
  void set_fail_after(std::optional<std::size_t> n);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// FNV-1a 64 over the decoded surface of every vocabulary id, as 16 hex digits.
std::string tokenizer_fingerprint(const LanguageModel& model);

}  // namespace adafuse
