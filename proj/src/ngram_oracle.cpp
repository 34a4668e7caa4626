#include "autoprompt/ngram_oracle.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "autoprompt/error.hpp"

namespace autoprompt {

NgramOracle NgramOracle::from_text(std::string_view corpus, Options options) {
  if (options.order < 1) throw ConfigError("n-gram order must be >= 1");
  NgramOracle lm(std::move(options));
  const std::size_t ctx = lm.options_.order - 1;

  std::set<Token> symbols;
  std::istringstream lines{std::string(corpus)};
  std::string line;
  while (std::getline(lines, line)) {
    TokenSeq seq(ctx, kBos);
    const TokenSeq words = lm.words_.tokenize(line);
    if (words.empty()) continue;
    for (const auto& w : words) {
      if (w == kBos || w == kEos) throw ConfigError(fmt::format("reserved symbol '{}' in corpus", w));
      symbols.insert(w);
      seq.push_back(w);
    }
    if (lm.options_.end_token) seq.emplace_back(kEos);

    for (std::size_t i = ctx; i < seq.size(); ++i) {
      TokenSeq hist(seq.begin() + static_cast<std::ptrdiff_t>(i - ctx),
                    seq.begin() + static_cast<std::ptrdiff_t>(i));
      ++lm.counts_[hist][seq[i]];
      ++lm.history_totals_[std::move(hist)];
    }
  }
  if (symbols.empty()) throw ConfigError("n-gram corpus is empty");
  if (lm.options_.end_token) symbols.insert(kEos);
  lm.vocab_.assign(symbols.begin(), symbols.end());
  if (lm.vocab_.size() > kMaxVocabulary)
    throw ConfigError(fmt::format("n-gram vocabulary has {} symbols (limit {})", lm.vocab_.size(),
                                  kMaxVocabulary));
  return lm;
}

NgramOracle NgramOracle::from_file(const std::filesystem::path& corpus, Options options) {
  std::ifstream in(corpus);
  if (!in) throw ConfigError(fmt::format("cannot open corpus '{}'", corpus.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str(), std::move(options));
}

std::string NgramOracle::identity() const {
  return fmt::format("{}(order={},vocab={})", options_.name, options_.order, vocab_.size());
}

std::optional<Token> NgramOracle::end_token() const {
  if (options_.end_token) return Token(kEos);
  return std::nullopt;
}

TokenSeq NgramOracle::history_of(std::span<const Token> preceding) const {
  const std::size_t ctx = options_.order - 1;
  TokenSeq hist(ctx, kBos);
  const std::size_t take = std::min(ctx, preceding.size());
  std::copy(preceding.end() - static_cast<std::ptrdiff_t>(take), preceding.end(),
            hist.end() - static_cast<std::ptrdiff_t>(take));
  return hist;
}

std::size_t NgramOracle::count(std::span<const Token> history, const Token& word) const {
  auto it = counts_.find(TokenSeq(history.begin(), history.end()));
  if (it == counts_.end()) return 0;
  auto jt = it->second.find(word);
  return jt == it->second.end() ? 0 : jt->second;
}

double NgramOracle::logprob(std::span<const Token> history, const Token& word) const {
  const TokenSeq hist(history.begin(), history.end());
  auto tot = history_totals_.find(hist);
  const double c_h = tot == history_totals_.end() ? 0.0 : static_cast<double>(tot->second);
  const double c_hw = static_cast<double>(count(hist, word));
  return std::log((c_hw + 1.0) / (c_h + static_cast<double>(vocab_.size())));
}

std::vector<double> NgramOracle::score_span(std::string_view full_text, TokenSpan span) const {
  const TokenSeq tokens = tokenize(full_text);
  if (span.end > tokens.size())
    throw AlignmentError(fmt::format("span [{}, {}) exceeds {} tokens", span.begin, span.end,
                                     tokens.size()));
  std::vector<double> out;
  out.reserve(span.size());
  for (std::size_t i = span.begin; i < span.end; ++i) {
    const TokenSeq hist = history_of(std::span(tokens).first(i));
    out.push_back(logprob(hist, tokens[i]));
  }
  return out;
}

TokenLogits NgramOracle::next_token_logits(std::string_view context) const {
  const TokenSeq tokens = tokenize(context);
  const TokenSeq hist = history_of(tokens);
  TokenLogits out;
  out.dense = true;
  out.log_probs = true;
  out.tokens = vocab_;
  out.logits.reserve(vocab_.size());
  for (const auto& w : vocab_) out.logits.push_back(logprob(hist, w));
  return out;
}

}  // namespace autoprompt
