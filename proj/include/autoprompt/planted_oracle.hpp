#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "autoprompt/dataset.hpp"
#include "autoprompt/oracle.hpp"

namespace autoprompt {

// Synthetic oracle whose behaviour is fixed by a keyword rule.
//
// Scoring: every output-span token gets match_logprob when the text before
// the span satisfies the rule, miss_logprob otherwise.
//
// Next-token distribution, decided by whichever occurs last in the context:
//  * an anchor (e.g. "Prompt:"): continue one of the weighted phrases that
//    extend the text written after the anchor, then end;
//  * a known example input: spell that example's output when the text
//    before the input satisfies the rule, wrong_answer otherwise, then end.
// With neither, phrases are continued from scratch. A small uniform mass is
// spread over the whole vocabulary so every logit is finite.
class PlantedRuleOracle final : public OracleBackend {
 public:
  static constexpr const char* kEndToken = "<|endoftext|>";

  struct Options {
    KeywordRule rule;
    std::vector<std::pair<std::string, double>> phrases;
    std::vector<Example> answers;
    std::string wrong_answer = " unknown";
    std::vector<std::string> anchors = {"Prompt:", "To compute the output from the input,"};
    std::vector<std::string> extra_vocabulary = {"the", " the"};
    double match_logprob = -0.1;
    double miss_logprob = -3.0;
    double smoothing = 0.01;
    std::string name = "planted";
  };

  explicit PlantedRuleOracle(Options options);

  std::string identity() const override { return options_.name; }
  Capabilities capabilities() const override { return {true, true}; }
  const TokenSeq& vocabulary() const override { return vocab_; }
  std::optional<Token> end_token() const override { return Token(kEndToken); }

  TokenSeq tokenize(std::string_view text) const override { return pieces_.tokenize(text); }
  std::string detokenize(std::span<const Token> tokens) const override {
    return pieces_.detokenize(tokens);
  }

  std::vector<double> score_span(std::string_view full_text, TokenSpan span) const override;
  TokenLogits next_token_logits(std::string_view context) const override;

  const Options& options() const { return options_; }

 private:
  TokenLogits distribution(const std::vector<std::pair<const TokenSeq*, double>>& targets,
                           std::span<const Token> written) const;

  Options options_;
  WhitespacePieceTokenizer pieces_;
  TokenSeq vocab_;
  std::map<Token, std::size_t> index_;
  std::vector<std::pair<TokenSeq, double>> phrase_tokens_;
  std::map<std::string, TokenSeq> answer_tokens_;  // input_text -> output tokens
  TokenSeq wrong_tokens_;
};

// Planted oracle for one synthetic math task: the rule is the task's keyword
// rule; the phrase set is the task description plus rule-free distractors;
// zero-shot answers come from `dataset`.
PlantedRuleOracle make_planted_math_oracle(const Dataset& dataset);

// Distractor phrases that satisfy none of the built-in keyword rules.
const std::vector<std::string>& planted_distractor_phrases();

}  // namespace autoprompt
