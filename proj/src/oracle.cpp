#include "autoprompt/oracle.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "autoprompt/error.hpp"
#include "autoprompt/rng.hpp"

namespace autoprompt {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

void log_softmax(std::vector<double>& logits) {
  double max = kNegInf;
  for (double x : logits) max = std::max(max, x);
  if (max == kNegInf) return;
  double total = 0.0;
  for (double x : logits) total += std::exp(x - max);
  const double lse = max + std::log(total);
  for (double& x : logits) x -= lse;
}

void GenerationParams::validate() const {
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  if (!(repetition_penalty >= 1.0)) throw ConfigError("repetition_penalty must be >= 1");
  if (max_new_tokens == 0) throw ConfigError("max_new_tokens must be >= 1");
}

const TokenSeq& OracleBackend::vocabulary() const {
  static const TokenSeq empty;
  return empty;
}

TokenSeq OracleBackend::generate(std::string_view context, const GenerationParams& params) const {
  return sample_continuation(*this, context, params);
}

std::vector<double> score_output_span(const OracleBackend& backend, std::string_view full_text,
                                      TokenSpan span) {
  if (span.begin > span.end) throw AlignmentError("span begin after end");
  if (span.empty()) return {};
  return backend.score_span(full_text, span);
}

double span_loss(std::span<const double> logprobs) {
  if (logprobs.empty()) throw EvaluationError("loss undefined for an empty output span");
  double total = 0.0;
  for (double lp : logprobs) total += lp;
  return -total / static_cast<double>(logprobs.size());
}

double prompt_loss(const OracleBackend& backend, const RenderTemplate& tmpl,
                   std::string_view prompt, std::span<const Example* const> examples,
                   std::size_t* truncated) {
  if (examples.empty()) throw EvaluationError("empty batch");
  double total = 0.0;
  for (const Example* ex : examples) {
    const RenderedExample r = render(tmpl, prompt, *ex, backend);
    if (r.truncated && truncated) ++*truncated;
    total += span_loss(score_output_span(backend, r.full_text, r.output_span));
  }
  return total / static_cast<double>(examples.size());
}

std::vector<double> next_token_distribution(const TokenLogits& logits,
                                            const std::unordered_set<Token>& seen,
                                            const GenerationParams& params) {
  std::vector<double> scores = logits.logits;
  if (params.repetition_penalty != 1.0) {
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (!seen.count(logits.tokens[i])) continue;
      scores[i] = scores[i] > 0 ? scores[i] / params.repetition_penalty
                                : scores[i] * params.repetition_penalty;
    }
  }

  std::vector<double> probs(scores.size(), 0.0);
  if (params.greedy) {
    std::size_t best = scores.size();
    for (std::size_t i = 0; i < scores.size(); ++i)
      if (scores[i] != kNegInf && (best == scores.size() || scores[i] > scores[best])) best = i;
    if (best == scores.size()) throw GenerationError("no token with finite score");
    probs[best] = 1.0;
    return probs;
  }

  for (double& s : scores) s /= params.temperature;
  log_softmax(scores);
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    probs[i] = std::exp(scores[i]);
    total += probs[i];
  }
  if (!(total > 0.0)) throw GenerationError("all token probabilities are zero");
  for (double& p : probs) p /= total;
  return probs;
}

TokenSeq sample_continuation(const OracleBackend& backend, std::string_view context,
                             const GenerationParams& params) {
  params.validate();
  const TokenSeq ctx_tokens = backend.tokenize(context);
  std::unordered_set<Token> seen(ctx_tokens.begin(), ctx_tokens.end());
  const auto eos = backend.end_token();
  Rng rng(params.seed);

  TokenSeq generated;
  while (generated.size() < params.max_new_tokens) {
    const TokenLogits logits = backend.next_token_logits(backend.append(context, generated));
    if (logits.size() == 0) throw GenerationError("backend returned no candidate tokens");
    const std::vector<double> probs = next_token_distribution(logits, seen, params);

    std::size_t pick = probs.size() - 1;
    const double u = uniform_unit(rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) {
        pick = i;
        break;
      }
    }
    while (probs[pick] == 0.0 && pick > 0) --pick;  // rounding at the tail

    const Token& tok = logits.tokens[pick];
    if ((eos && tok == *eos) ||
        std::find(params.stop_tokens.begin(), params.stop_tokens.end(), tok) !=
            params.stop_tokens.end())
      break;
    generated.push_back(tok);
    seen.insert(tok);
  }
  return generated;
}

}  // namespace autoprompt
