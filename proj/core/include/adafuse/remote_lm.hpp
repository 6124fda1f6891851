#pragma once

// LanguageModel backed by a server speaking the logprob wire protocol:
//
//   GET  /v1/info   -> {model_id, vocab_size, eos_token_id, tokenizer_fingerprint,
//                       [max_context_tokens], [eos_surface]}
//   POST /v1/encode {text}                                 -> {tokens}
//   POST /v1/decode {tokens}                               -> {text}
//   POST /v1/topk   {tokens, k}                            -> {candidates: [{token, logprob, surface}]}
//   POST /v1/score  {prefix_tokens, continuation_tokens}   -> {logprobs}
//
// Logprobs are base-e, ids 0-based. Errors come back as {error: {code, message}}
// with a non-2xx status.

#include <chrono>
#include <cstddef>
#include <memory>
#include <string>

#include "adafuse/lm_core.hpp"

namespace adafuse {

struct RemoteOptions {
  std::chrono::milliseconds timeout{10000};
  std::size_t attempts = 3;  // total tries per request for transport failures
  std::chrono::milliseconds backoff{50};  // doubled after each failed try
  std::size_t default_topk = 8;
};

struct RemoteInfo {
  ModelInfo model;
  std::string tokenizer_fingerprint;
};

class RemoteModel final : public LanguageModel {
 public:
  // Fetches and validates /v1/info. Throws ProviderUnavailableError or ProtocolError.
  explicit RemoteModel(std::string base_url, RemoteOptions options = {});
  ~RemoteModel() override;
  RemoteModel(const RemoteModel&) = delete;
  RemoteModel& operator=(const RemoteModel&) = delete;

  const ModelInfo& info() const override;
  const RemoteInfo& remote_info() const;
  const std::string& base_url() const;

  TokenSequence encode(std::string_view text) const override;
  std::string decode(std::span<const TokenId> tokens) const override;
  TokenDistribution topk(std::span<const TokenId> context, std::size_t k) const override;
  std::vector<double> score_tokens(std::span<const TokenId> context,
                                   std::span<const TokenId> continuation) const override;

  // Transport-level retries performed so far (diagnostics).
  std::size_t retries() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Parses and validates an /v1/info body. Throws ProtocolError naming the field.
RemoteInfo parse_remote_info(std::string_view body);

}  // namespace adafuse
