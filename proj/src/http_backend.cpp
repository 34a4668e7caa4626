#include "autoprompt/http_backend.hpp"

#include <fmt/format.h>
#include <httplib.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <thread>

#include "autoprompt/error.hpp"

namespace autoprompt {

using nlohmann::json;

namespace {

bool retryable(int status) { return status == 0 || status == 408 || status == 429 || status >= 500; }

const json& logprobs_block(const json& response) {
  if (!response.contains("choices") || !response["choices"].is_array() || response["choices"].empty())
    throw TransportError("completion response has no choices");
  const json& choice = response["choices"][0];
  if (!choice.contains("logprobs") || !choice["logprobs"].is_object())
    throw CapabilityError("completion response carries no logprobs");
  return choice["logprobs"];
}

}  // namespace

HttpBackend::HttpBackend(HttpBackendOptions options) : options_(std::move(options)) {
  if (options_.endpoint.empty()) throw ConfigError("http backend needs an endpoint");
  if (options_.model.empty()) throw ConfigError("http backend needs a model name");
  if (options_.retry.attempts < 1) throw ConfigError("retry attempts must be >= 1");
  if (options_.top_logprobs < 1) throw ConfigError("top_logprobs must be >= 1");
}

json HttpBackend::post(const json& body) const {
  const std::string payload = body.dump();
  auto backoff = options_.retry.initial_backoff;
  int status = 0;
  std::string detail;
  for (int attempt = 1; attempt <= options_.retry.attempts; ++attempt) {
    httplib::Client cli(options_.endpoint);
    cli.set_connection_timeout(options_.timeout);
    cli.set_read_timeout(options_.timeout);
    cli.set_write_timeout(options_.timeout);
    httplib::Headers headers;
    if (!options_.api_key.empty()) headers.emplace("Authorization", "Bearer " + options_.api_key);

    auto res = cli.Post(options_.path, headers, payload, "application/json");
    if (res && res->status >= 200 && res->status < 300) {
      try {
        return json::parse(res->body);
      } catch (const json::parse_error& e) {
        throw TransportError(fmt::format("malformed JSON from {}: {}", options_.endpoint, e.what()),
                             res->status);
      }
    }
    status = res ? res->status : 0;
    detail = res ? res->body.substr(0, 200) : httplib::to_string(res.error());
    if (!retryable(status) || attempt == options_.retry.attempts) break;
    spdlog::warn("request to {} failed (status {}), retrying in {} ms", options_.endpoint, status,
                 backoff.count());
    std::this_thread::sleep_for(backoff);
    backoff = std::chrono::milliseconds(
        static_cast<long long>(static_cast<double>(backoff.count()) * options_.retry.multiplier));
  }
  throw TransportError(fmt::format("request to {}{} failed with status {}: {}", options_.endpoint,
                                   options_.path, status, detail),
                       status);
}

EchoResult HttpBackend::echo(std::string_view text) const {
  if (!options_.echo_supported) throw CapabilityError("backend does not support echo mode");
  const json resp = post({{"model", options_.model},
                          {"prompt", text},
                          {"max_tokens", 0},
                          {"temperature", 0},
                          {"echo", true},
                          {"logprobs", 1}});
  const json& lp = logprobs_block(resp);
  if (!lp.contains("tokens") || !lp.contains("token_logprobs"))
    throw CapabilityError("echo response lacks tokens or token_logprobs");
  EchoResult out;
  for (const auto& t : lp["tokens"]) out.tokens.push_back(t.get<std::string>());
  for (const auto& v : lp["token_logprobs"])
    out.logprobs.push_back(v.is_null() ? std::nullopt : std::optional<double>(v.get<double>()));
  if (out.tokens.size() != out.logprobs.size())
    throw CapabilityError("echo response has mismatched tokens and logprobs");
  return out;
}

TokenSeq HttpBackend::tokenize(std::string_view text) const {
  {
    std::lock_guard lock(cache_mu_);
    if (auto it = token_cache_.find(text); it != token_cache_.end()) return it->second;
  }
  TokenSeq tokens = echo(text).tokens;
  std::lock_guard lock(cache_mu_);
  token_cache_.emplace(std::string(text), tokens);
  return tokens;
}

std::string HttpBackend::detokenize(std::span<const Token> tokens) const {
  std::string out;
  for (const auto& t : tokens) out += t;
  return out;
}

std::vector<double> HttpBackend::score_span(std::string_view full_text, TokenSpan span) const {
  const EchoResult e = echo(full_text);
  if (span.end > e.tokens.size())
    throw AlignmentError(fmt::format("span [{}, {}) exceeds {} server tokens", span.begin, span.end,
                                     e.tokens.size()));
  std::vector<double> out;
  out.reserve(span.size());
  for (std::size_t i = span.begin; i < span.end; ++i) {
    if (!e.logprobs[i]) throw AlignmentError(fmt::format("server returned no logprob for token {}", i));
    out.push_back(*e.logprobs[i]);
  }
  return out;
}

TokenLogits HttpBackend::next_token_logits(std::string_view context) const {
  const json resp = post({{"model", options_.model},
                          {"prompt", context},
                          {"max_tokens", 1},
                          {"temperature", 0},
                          {"logprobs", options_.top_logprobs}});
  const json& lp = logprobs_block(resp);
  if (!lp.contains("top_logprobs") || !lp["top_logprobs"].is_array() || lp["top_logprobs"].empty() ||
      !lp["top_logprobs"][0].is_object())
    throw CapabilityError("completion response lacks top_logprobs");

  std::vector<std::pair<Token, double>> entries;
  for (const auto& [tok, v] : lp["top_logprobs"][0].items()) entries.emplace_back(tok, v.get<double>());
  if (entries.empty()) throw CapabilityError("completion response has empty top_logprobs");
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });

  TokenLogits out;
  out.dense = false;
  out.log_probs = true;
  double covered = 0.0;
  for (auto& [tok, v] : entries) {
    covered += std::exp(v);
    out.tokens.push_back(std::move(tok));
    out.logits.push_back(v);
  }
  out.remainder_mass = std::clamp(1.0 - covered, 0.0, 1.0);
  return out;
}

TokenSeq HttpBackend::generate(std::string_view context, const GenerationParams& params) const {
  params.validate();
  json body = {{"model", options_.model},
               {"prompt", context},
               {"max_tokens", params.max_new_tokens},
               {"temperature", params.greedy ? 0.0 : params.temperature},
               {"logprobs", 1}};
  if (!params.stop_tokens.empty()) body["stop"] = params.stop_tokens;
  if (options_.send_seed) body["seed"] = params.seed;
  if (params.repetition_penalty != 1.0) body["repetition_penalty"] = params.repetition_penalty;

  const json resp = post(body);
  if (!resp.contains("choices") || resp["choices"].empty())
    throw TransportError("completion response has no choices");
  const json& choice = resp["choices"][0];
  TokenSeq out;
  if (choice.contains("logprobs") && choice["logprobs"].is_object() &&
      choice["logprobs"].contains("tokens")) {
    for (const auto& t : choice["logprobs"]["tokens"]) out.push_back(t.get<std::string>());
  } else if (choice.contains("text")) {
    out = tokenize(choice["text"].get<std::string>());
  }
  if (options_.end_token)
    out.erase(std::find(out.begin(), out.end(), *options_.end_token), out.end());
  if (out.size() > params.max_new_tokens) out.resize(params.max_new_tokens);
  return out;
}

double HttpBackend::total_logprob(std::string_view text) const {
  double total = 0.0;
  for (const auto& lp : echo(text).logprobs)
    if (lp) total += *lp;
  return total;
}

std::unique_ptr<HttpBackend> make_http_backend(const std::string& endpoint, const std::string& model,
                              const std::string& api_key, RetryPolicy retry) {
  HttpBackendOptions opt;
  opt.endpoint = endpoint;
  opt.model = model;
  opt.api_key = api_key;
  opt.retry = retry;
  return std::make_unique<HttpBackend>(std::move(opt));
}

double conditional_logprob(const HttpBackend& backend, std::string_view context,
                           std::string_view continuation) {
  std::string joined(context);
  joined += continuation;
  return backend.total_logprob(joined) - backend.total_logprob(context);
}

}  // namespace autoprompt
