#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "autoprompt/dataset.hpp"
#include "autoprompt/tokenizer.hpp"

namespace autoprompt {

// Next-token scores. Dense logits cover the backend vocabulary in order;
// sparse logits hold a top-k subset plus the probability mass left over.
struct TokenLogits {
  std::vector<Token> tokens;
  std::vector<double> logits;
  bool dense = true;
  bool log_probs = false;        // logits are already normalized log-probabilities
  double remainder_mass = 0.0;   // sparse only, in [0, 1]

  std::size_t size() const { return tokens.size(); }
};

// In-place log-softmax. Entries at -inf stay at -inf.
void log_softmax(std::vector<double>& logits);

struct GenerationParams {
  double temperature = 1.0;
  double repetition_penalty = 1.0;
  std::size_t max_new_tokens = 16;
  TokenSeq stop_tokens;
  std::uint64_t seed = 0;
  bool greedy = false;  // temperature -> 0 limit

  void validate() const;
};

struct Capabilities {
  bool full_logits = false;
  bool echo_logprobs = false;
};

// Language-model oracle. Implementations must be safe to call concurrently
// from several threads.
class OracleBackend : public Tokenizer {
 public:
  virtual std::string identity() const = 0;
  virtual Capabilities capabilities() const = 0;

  // Closed vocabulary, or empty when the backend does not expose one.
  virtual const TokenSeq& vocabulary() const;
  virtual std::optional<Token> end_token() const { return std::nullopt; }

  // Number of preceding tokens that fully determine the next-token
  // distribution, when the model is Markov. Beam search merges hypotheses
  // that agree on that many trailing tokens.
  virtual std::optional<std::size_t> markov_order() const { return std::nullopt; }

  // log p(token_t | tokens_<t) for every token of `span` within
  // tokenize(full_text).
  virtual std::vector<double> score_span(std::string_view full_text, TokenSpan span) const = 0;

  virtual TokenLogits next_token_logits(std::string_view context) const = 0;

  // Default: token-by-token sampling over next_token_logits.
  virtual TokenSeq generate(std::string_view context, const GenerationParams& params) const;
};

// Validates the span against the backend tokenization, then scores it.
std::vector<double> score_output_span(const OracleBackend& backend, std::string_view full_text,
                                      TokenSpan span);

// Negative mean log-probability. Throws EvaluationError on an empty span.
double span_loss(std::span<const double> logprobs);

// Mean span loss of `prompt` over `examples`. `truncated`, when given, is
// incremented for each example that had to be cut to fit.
double prompt_loss(const OracleBackend& backend, const RenderTemplate& tmpl,
                   std::string_view prompt, std::span<const Example* const> examples,
                   std::size_t* truncated = nullptr);

// Penalizes scores of tokens in `seen`: positive scores are divided by the
// penalty, negative ones multiplied. Then divides by temperature and returns
// the sampling distribution (probabilities aligned with logits.tokens).
std::vector<double> next_token_distribution(const TokenLogits& logits,
                                            const std::unordered_set<Token>& seen,
                                            const GenerationParams& params);

// Sampling loop behind OracleBackend::generate.
TokenSeq sample_continuation(const OracleBackend& backend, std::string_view context,
                             const GenerationParams& params);

}  // namespace autoprompt
