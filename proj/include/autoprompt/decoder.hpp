#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "autoprompt/dataset.hpp"
#include "autoprompt/oracle.hpp"

namespace autoprompt {

struct BeamParams {
  std::size_t width = 4;
  std::size_t max_len = 16;
  double length_penalty_alpha = 0.6;

  void validate() const;
};

struct BeamHypothesis {
  TokenSeq tokens;            // excludes the end token
  bool ended = false;         // finished by emitting the end token
  double score = 0.0;         // sum of token log-probabilities, end token included
  double normalized = 0.0;    // score / ((5 + len) / 6)^alpha
  std::size_t finished_step = 0;

  std::size_t length() const { return tokens.size() + (ended ? 1 : 0); }
};

double length_normalized(double score, std::size_t length, double alpha);

// Strict ordering of finished hypotheses: higher normalized score, then
// earlier finishing step, then lexicographically smaller tokens.
bool ranks_before(const BeamHypothesis& a, const BeamHypothesis& b);

// Called after each expansion with the surviving (unfinished) beam.
using BeamObserver = std::function<void(std::size_t step, const std::vector<BeamHypothesis>& beam)>;

// Scores a batch of partial sequences; returns one normalized
// log-distribution per sequence.
using BeamScorer = std::function<std::vector<TokenLogits>(const std::vector<TokenSeq>& prefixes)>;

struct BeamSpace {
  std::optional<Token> end_token;
  std::optional<std::size_t> markov_order;  // enables hypothesis recombination
};

// Generic beam search. Every end-token expansion of a surviving hypothesis
// is kept as a finished candidate; hypotheses that agree on their last
// markov_order tokens are merged (best score wins). Unfinished hypotheses
// still alive at max_len finish there.
std::vector<BeamHypothesis> beam_search(const BeamScorer& scorer, const BeamSpace& space,
                                        const BeamParams& params,
                                        const BeamObserver& observer = nullptr);

// Beam search continuing `context` on a single backend.
std::vector<BeamHypothesis> beam_search(const OracleBackend& backend, std::string_view context,
                                        const BeamParams& params,
                                        const BeamObserver& observer = nullptr);

// Argmax decoding; ties go to the lexicographically smallest token.
TokenSeq greedy_decode(const OracleBackend& backend, std::string_view context, std::size_t max_len);

// Arithmetic mean of raw logits across contexts. Dense inputs must share
// the token order; sparse inputs are aligned on the union of their tokens
// with absent entries at -inf. Throws CoverageError when no token is
// present in every input.
TokenLogits average_logits(std::span<const TokenLogits> per_context);

struct AveragedDecodeOptions {
  std::size_t subsample = 0;  // 0: every example
  std::uint64_t seed = 0;     // picks the subsample
  std::size_t parallelism = 1;
};

struct AveragedDecodeResult {
  std::vector<BeamHypothesis> beams;
  std::vector<std::string> contexts;
  bool sparse_logits = false;  // averages treated unseen tokens as -inf
};

// Builds one context per example ("<example><template>"), then beam-decodes
// a shared suffix whose next-token distribution at every step is the
// log-softmax of the averaged logits over all contexts.
AveragedDecodeResult averaged_suffix_decode(const OracleBackend& backend, const Dataset& dataset,
                                            std::string_view template_text, const BeamParams& params,
                                            const AveragedDecodeOptions& options = {},
                                            const BeamObserver& observer = nullptr);

}  // namespace autoprompt
