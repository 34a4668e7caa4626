#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "autoprompt/oracle.hpp"

namespace autoprompt {

// Add-one smoothed n-gram model over a closed whitespace vocabulary:
//
//   p(w | h) = (c(h, w) + 1) / (c(h) + V)
//
// where h is the previous order-1 tokens (padded with "<s>") and V counts
// every predictable symbol, including "</s>" when end tokens are enabled.
// Each corpus line is an independent sequence.
class NgramOracle final : public OracleBackend {
 public:
  static constexpr std::size_t kMaxVocabulary = 64;
  static constexpr const char* kBos = "<s>";
  static constexpr const char* kEos = "</s>";

  struct Options {
    std::size_t order = 2;
    bool end_token = false;
    std::string name = "ngram";
  };

  static NgramOracle from_text(std::string_view corpus, Options options);
  static NgramOracle from_file(const std::filesystem::path& corpus, Options options);

  std::string identity() const override;
  Capabilities capabilities() const override { return {true, true}; }
  const TokenSeq& vocabulary() const override { return vocab_; }
  std::optional<Token> end_token() const override;
  std::optional<std::size_t> markov_order() const override { return options_.order - 1; }

  TokenSeq tokenize(std::string_view text) const override { return words_.tokenize(text); }
  std::string detokenize(std::span<const Token> tokens) const override {
    return words_.detokenize(tokens);
  }
  std::string append(std::string_view context, std::span<const Token> continuation) const override {
    return words_.append(context, continuation);
  }

  std::vector<double> score_span(std::string_view full_text, TokenSpan span) const override;
  TokenLogits next_token_logits(std::string_view context) const override;

  double logprob(std::span<const Token> history, const Token& word) const;
  std::size_t count(std::span<const Token> history, const Token& word) const;

 private:
  explicit NgramOracle(Options options) : options_(std::move(options)) {}

  TokenSeq history_of(std::span<const Token> preceding) const;

  Options options_;
  WhitespaceWordTokenizer words_;
  TokenSeq vocab_;
  std::map<TokenSeq, std::map<Token, std::size_t>> counts_;
  std::map<TokenSeq, std::size_t> history_totals_;
};

}  // namespace autoprompt
