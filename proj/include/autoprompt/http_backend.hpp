#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "autoprompt/oracle.hpp"

namespace autoprompt {

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
};

struct HttpBackendOptions {
  std::string endpoint;                 // scheme://host[:port]
  std::string path = "/v1/completions";
  std::string model;
  std::string api_key;                  // bearer token; never serialized
  int top_logprobs = 5;
  bool echo_supported = true;
  bool send_seed = true;
  RetryPolicy retry;
  std::chrono::seconds timeout{60};
  TokenSeq vocabulary;                  // optional; needed by coordinate swap
  std::optional<Token> end_token;
};

struct EchoResult {
  TokenSeq tokens;
  std::vector<std::optional<double>> logprobs;  // first entry is usually null
};

// OpenAI-style completion endpoint. Span scoring uses echo mode with
// logprobs; next-token logits are the top-k logprobs of a one-token
// completion (sparse); generation is sampled server-side.
class HttpBackend final : public OracleBackend {
 public:
  explicit HttpBackend(HttpBackendOptions options);

  std::string identity() const override { return options_.model; }
  Capabilities capabilities() const override { return {false, options_.echo_supported}; }
  const TokenSeq& vocabulary() const override { return options_.vocabulary; }
  std::optional<Token> end_token() const override { return options_.end_token; }

  TokenSeq tokenize(std::string_view text) const override;
  std::string detokenize(std::span<const Token> tokens) const override;

  std::vector<double> score_span(std::string_view full_text, TokenSpan span) const override;
  TokenLogits next_token_logits(std::string_view context) const override;
  TokenSeq generate(std::string_view context, const GenerationParams& params) const override;

  EchoResult echo(std::string_view text) const;

  // Sum of the conditional logprobs of every token after the first.
  double total_logprob(std::string_view text) const;

  // POSTs `body` with retries. Throws TransportError carrying the last
  // HTTP status (0 when the connection itself failed).
  nlohmann::json post(const nlohmann::json& body) const;

 private:
  HttpBackendOptions options_;
  mutable std::mutex cache_mu_;
  mutable std::map<std::string, TokenSeq, std::less<>> token_cache_;
};

std::unique_ptr<HttpBackend> make_http_backend(const std::string& endpoint, const std::string& model,
                              const std::string& api_key, RetryPolicy retry = {});

// Conditional log-probability of `continuation` given `context` from two
// whole-sequence scores: score(context + continuation) - score(context).
double conditional_logprob(const HttpBackend& backend, std::string_view context,
                           std::string_view continuation);

}  // namespace autoprompt
